#pragma once

// Scenario configuration, the lazily evaluated stage pipeline, and assertion
// checking behind the command-line tool.

#include "urg/functional.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace urg::app {

/// Schema violation; `path` names the offending field (e.g. "grid.h").
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct DomainSpec {
    std::string kind = "flat";  // flat | graph | sawtooth | comb | file
    double half_length = 8.0;
    double spacing = 1.0 / 256;
    double slope = 0.1;
    double amplitude = 0.05;
    double period = 2.0;
    int images = 3;
    std::string path;
};

struct OperatorSpec {
    std::string kind = "identity";  // identity | rotation | perturbation
    double omega = 0.0;
    double anisotropy = 1.0;
    double amplitude = 0.0;
    bool mollify = false;
};

struct GridSpec {
    double h = 1.0 / 32;
    Vec2 lo{-2.0, -1.0}, hi{2.0, 2.0};
    bool reflect[4] = {false, false, false, false};
};

struct DyadicSpec {
    int k_min = 0, k_max = 6;
};

struct CoronaSpec {
    double eps0 = 0.05, eps1 = 0.0025;
    Vec2 q0_center{0.0, 0.0};
    int q0_k = 2;
    double flat_window = 8.0;
    double alpha_window = 8.0;
};

struct SolveSpec {
    std::string data = "green";  // linear | green | step
    double tol = 1e-10;
};

struct FunctionalSpec {
    std::vector<double> radii{0.25, 0.5, 1.0};
    double x_lo = -1.0, x_hi = 1.0;
};

struct CounterexampleSpec {
    int k = 7;
    double beta = 1.0;
    std::vector<double> radii{8, 16, 32, 64};
    double h = 1.0 / 64;
    double t0 = 2.0;
};

struct PlotSpec {
    std::string kind, report, output;
};

struct Assertion {
    std::string metric, op;
    double value = 0.0;
};

struct Scenario {
    std::string name;
    DomainSpec domain;
    OperatorSpec op;
    GridSpec grid;
    DyadicSpec dyadic;
    CoronaSpec corona;
    double beta = 1.0;
    SolveSpec solve;
    FunctionalSpec functional;
    CounterexampleSpec counterexample;
    std::vector<std::string> stages;
    std::vector<PlotSpec> plots;
    std::vector<Assertion> assertions;
};

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"dyadic", "alpha", "corona", "graph", "changevar",
                                                "dbeta", "solve", "functional", "counterexample"};
    return names;
}

Scenario parse_scenario(const nlohmann::json& j);
/// Missing or unparsable files raise ConfigError with an empty path.
Scenario load_scenario(const std::string& path);

struct AssertionResult {
    Assertion a;
    double actual = 0.0;
    bool found = false, pass = false;
};

/// Pipeline state: every product is built on first use and cached.
class Context {
public:
    Context(Scenario s, std::filesystem::path out, std::uint64_t seed = 1);
    ~Context();

    const Scenario& scenario() const { return s_; }
    const std::map<std::string, double>& metrics() const { return metrics_; }

    void run_stage(const std::string& name);
    std::vector<AssertionResult> check_assertions() const;
    void write_plots();

    const BoundaryCloud& cloud();
    const DyadicTree& tree();
    int q0();
    const std::map<int, CubeGeometry>& geometry();
    const Corona& corona();
    int regime_index();
    const RegimeGraph& graph();
    const DomainGrid& grid();
    const OperatorField& op();
    const SolutionField& solution();
    const DBetaField& dfield();

private:
    struct Cache;
    std::ofstream open(const std::string& file) const;
    void write_json(const std::string& file, const nlohmann::json& j) const;
    bool inside(const Vec2& X) const;
    double boundary_height(double x) const;

    void stage_dyadic();
    void stage_alpha();
    void stage_corona();
    void stage_graph();
    void stage_changevar();
    void stage_dbeta();
    void stage_solve();
    void stage_functional();
    void stage_counterexample();

    Scenario s_;
    std::filesystem::path out_;
    std::uint64_t seed_;
    std::map<std::string, double> metrics_;
    std::unique_ptr<Cache> c_;
};

struct RunResult {
    std::vector<AssertionResult> assertions;
    bool ok() const {
        for (const auto& r : assertions)
            if (!r.pass) return false;
        return true;
    }
};

/// Runs the declared stages in order, writes the metrics and plots, then checks assertions.
RunResult run_scenario(const Scenario& s, const std::filesystem::path& out, std::uint64_t seed = 1);

} // namespace urg::app
