// Command-line front end: one subcommand per pipeline stage, `run` for a full
// scenario with its assertions, and `plot` for SVG renderings of reports.

#include "urg/plot.hpp"
#include "urg/scenario.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 1;
    int threads = 1;
};

void add_common(CLI::App* c, Common& o, bool config_positional) {
    if (config_positional)
        c->add_option("config,--config", o.config, "scenario JSON")->required();
    else
        c->add_option("--config", o.config, "scenario JSON")->required();
    c->add_option("--out", o.out, "output directory");
    c->add_option("--seed", o.seed, "random seed for sampled certificates");
    c->add_option("--threads", o.threads, "worker threads (stages run sequentially)")->check(CLI::PositiveNumber);
}

int run_stage(const std::string& stage, const Common& o) {
    urg::app::Scenario s = urg::app::load_scenario(o.config);
    urg::app::Context ctx(s, o.out, o.seed);
    ctx.run_stage(stage);
    for (auto& [k, v] : ctx.metrics()) std::cout << k << " = " << v << '\n';
    return 0;
}

int run_all(const Common& o) {
    urg::app::Scenario s = urg::app::load_scenario(o.config);
    spdlog::info("scenario {}: {} stages", s.name, s.stages.size());
    urg::app::RunResult R = urg::app::run_scenario(s, o.out, o.seed);
    for (const auto& r : R.assertions) {
        if (r.found)
            std::cout << (r.pass ? "PASS " : "FAIL ") << r.a.metric << ' ' << r.a.op << ' ' << r.a.value
                      << " (actual " << r.actual << ")\n";
        else
            std::cout << "FAIL " << r.a.metric << " (metric not produced)\n";
    }
    std::cout << (R.ok() ? "all assertions passed" : "assertions failed") << '\n';
    return R.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Carleson-functional experiments on rough boundaries"};
    app.require_subcommand(1);
    spdlog::set_pattern("%v");

    std::map<std::string, Common> opts;
    for (const std::string& st : urg::app::stage_names())
        add_common(app.add_subcommand(st, "run the " + st + " stage and its prerequisites"), opts[st], false);
    Common run_opts;
    add_common(app.add_subcommand("run", "run every declared stage and check assertions"), run_opts, true);

    std::string report, kind, plot_out;
    auto* plot = app.add_subcommand("plot", "render a report as SVG");
    plot->add_option("report", report, "report file")->required();
    plot->add_option("kind,--kind", kind, "field | curve | tree")->required();
    plot->add_option("--out", plot_out, "output SVG (default: <report>.<kind>.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (plot->parsed()) {
            std::string svg = urg::app::plot_file(report, kind);
            std::string path = plot_out.empty() ? report + "." + kind + ".svg" : plot_out;
            std::ofstream f(path);
            if (!f) {
                std::cerr << "error: cannot write " << path << '\n';
                return 1;
            }
            f << svg;
            return 0;
        }
        if (app.got_subcommand("run")) return run_all(run_opts);
        for (auto& [st, o] : opts)
            if (app.got_subcommand(st)) return run_stage(st, o);
    } catch (const urg::app::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const urg::Error& e) {
        std::cerr << "stage failed: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
