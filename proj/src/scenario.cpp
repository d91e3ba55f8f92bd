#include "urg/scenario.hpp"

#include "urg/plot.hpp"

#include <fstream>
#include <set>

namespace urg::app {

namespace {

// Strict reader over one JSON object: every key must be consumed.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double num(const std::string& key, double def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(sub(key), "expected a number");
        return v.get<double>();
    }
    double positive(const std::string& key, double def) {
        double v = num(key, def);
        if (!(v > 0) || !std::isfinite(v)) throw ConfigError(sub(key), "expected a positive number");
        return v;
    }
    int integer(const std::string& key, int def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(sub(key), "expected an integer");
        return v.get<int>();
    }
    bool boolean(const std::string& key, bool def) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(sub(key), "expected a boolean");
        return v.get<bool>();
    }
    std::string str(const std::string& key, const std::string& def, const std::vector<std::string>& allowed = {}) {
        if (!take(key)) {
            if (def.empty() && !allowed.empty()) throw ConfigError(sub(key), "required field missing");
            return def;
        }
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(sub(key), "expected a string");
        std::string s = v.get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end())
            throw ConfigError(sub(key), "unknown value '" + s + "'");
        return s;
    }
    std::vector<double> numbers(const std::string& key, std::vector<double> def, std::size_t min_size = 1) {
        if (!take(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.size() < min_size) throw ConfigError(sub(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(sub(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }
    const nlohmann::json* object(const std::string& key) {
        if (!take(key)) return nullptr;
        return &j_.at(key);
    }
    const nlohmann::json* array(const std::string& key) {
        if (!take(key)) return nullptr;
        if (!j_.at(key).is_array()) throw ConfigError(sub(key), "expected an array");
        return &j_.at(key);
    }
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(sub(it.key()), "unknown field");
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> used_;

    bool take(const std::string& key) {
        if (!j_.contains(key)) return false;
        used_.insert(key);
        return true;
    }
};

Vec2 pair_at(const std::vector<double>& v) { return {v[0], v[1]}; }

} // namespace

Scenario parse_scenario(const nlohmann::json& j) {
    Scenario s;
    Reader r(j, "");
    if (!r.has("name")) throw ConfigError("name", "required field missing");
    s.name = r.str("name", "");
    if (s.name.empty()) throw ConfigError("name", "must not be empty");

    if (const auto* d = r.object("domain")) {
        Reader q(*d, "domain");
        s.domain.kind = q.str("kind", "", {"flat", "graph", "sawtooth", "comb"});
        s.domain.half_length = q.positive("half_length", s.domain.half_length);
        s.domain.spacing = q.positive("spacing", s.domain.spacing);
        s.domain.slope = q.num("slope", s.domain.slope);
        s.domain.amplitude = q.num("amplitude", s.domain.amplitude);
        s.domain.period = q.positive("period", s.domain.period);
        s.domain.images = q.integer("images", s.domain.images);
        if (s.domain.images < 0) throw ConfigError("domain.images", "must be non-negative");
        q.finish();
    } else {
        throw ConfigError("domain", "required field missing");
    }

    if (const auto* o = r.object("operator")) {
        Reader q(*o, "operator");
        s.op.kind = q.str("kind", "identity", {"identity", "rotation", "perturbation"});
        if (const auto* p = q.object("params")) {
            Reader pr(*p, "operator.params");
            s.op.omega = pr.num("omega", s.op.omega);
            s.op.anisotropy = pr.positive("anisotropy", s.op.anisotropy);
            s.op.amplitude = pr.num("amplitude", s.op.amplitude);
            if (std::abs(s.op.amplitude) >= 1) throw ConfigError("operator.params.amplitude", "must lie in (-1, 1)");
            s.op.mollify = pr.boolean("mollify", s.op.mollify);
            pr.finish();
        }
        q.finish();
    }

    if (const auto* g = r.object("grid")) {
        Reader q(*g, "grid");
        s.grid.h = q.positive("h", s.grid.h);
        auto w = q.numbers("window", {s.grid.lo.x(), s.grid.lo.y(), s.grid.hi.x(), s.grid.hi.y()}, 4);
        if (w.size() != 4 || !(w[2] > w[0]) || !(w[3] > w[1]))
            throw ConfigError("grid.window", "expected [x0, y0, x1, y1] with x1 > x0 and y1 > y0");
        s.grid.lo = {w[0], w[1]};
        s.grid.hi = {w[2], w[3]};
        if (const auto* rf = q.array("reflect")) {
            if (rf->size() != 4) throw ConfigError("grid.reflect", "expected four booleans (left, right, bottom, top)");
            for (int k = 0; k < 4; ++k) {
                if (!(*rf)[k].is_boolean()) throw ConfigError("grid.reflect[" + std::to_string(k) + "]", "expected a boolean");
                s.grid.reflect[k] = (*rf)[k].get<bool>();
            }
        }
        q.finish();
    }

    if (const auto* d = r.object("dyadic")) {
        Reader q(*d, "dyadic");
        s.dyadic.k_min = q.integer("k_min", s.dyadic.k_min);
        s.dyadic.k_max = q.integer("k_max", s.dyadic.k_max);
        if (s.dyadic.k_max < s.dyadic.k_min) throw ConfigError("dyadic.k_max", "must be at least k_min");
        q.finish();
    }

    if (const auto* c = r.object("corona")) {
        Reader q(*c, "corona");
        s.corona.eps0 = q.positive("eps0", s.corona.eps0);
        s.corona.eps1 = q.positive("eps1", s.corona.eps1);
        if (const auto* q0 = q.object("q0")) {
            Reader qq(*q0, "corona.q0");
            s.corona.q0_center = pair_at(qq.numbers("center", {0, 0}, 2));
            s.corona.q0_k = qq.integer("k", s.corona.q0_k);
            qq.finish();
        }
        s.corona.flat_window = q.positive("flat_window", s.corona.flat_window);
        s.corona.alpha_window = q.positive("alpha_window", s.corona.alpha_window);
        q.finish();
    }

    if (const auto* d = r.object("dbeta")) {
        Reader q(*d, "dbeta");
        s.beta = q.positive("beta", s.beta);
        q.finish();
    }

    if (const auto* d = r.object("solve")) {
        Reader q(*d, "solve");
        s.solve.data = q.str("data", s.solve.data, {"linear", "green", "step"});
        s.solve.tol = q.positive("tol", s.solve.tol);
        q.finish();
    }

    if (const auto* f = r.object("functional")) {
        Reader q(*f, "functional");
        s.functional.radii = q.numbers("radii", s.functional.radii);
        for (std::size_t i = 0; i < s.functional.radii.size(); ++i)
            if (!(s.functional.radii[i] > 0)) throw ConfigError("functional.radii[" + std::to_string(i) + "]", "must be positive");
        auto xr = q.numbers("x_range", {s.functional.x_lo, s.functional.x_hi}, 2);
        if (xr.size() != 2 || !(xr[1] >= xr[0])) throw ConfigError("functional.x_range", "expected [lo, hi] with hi >= lo");
        s.functional.x_lo = xr[0], s.functional.x_hi = xr[1];
        q.finish();
    }

    if (const auto* c = r.object("counterexample")) {
        Reader q(*c, "counterexample");
        s.counterexample.k = q.integer("k", s.counterexample.k);
        s.counterexample.beta = q.positive("beta", s.counterexample.beta);
        s.counterexample.radii = q.numbers("radii", s.counterexample.radii, 2);
        s.counterexample.h = q.positive("h", s.counterexample.h);
        s.counterexample.t0 = q.positive("t0", s.counterexample.t0);
        q.finish();
    }

    if (const auto* st = r.array("stages")) {
        for (std::size_t i = 0; i < st->size(); ++i) {
            std::string p = "stages[" + std::to_string(i) + "]";
            if (!(*st)[i].is_string()) throw ConfigError(p, "expected a stage name");
            std::string n = (*st)[i].get<std::string>();
            const auto& all = stage_names();
            if (std::find(all.begin(), all.end(), n) == all.end()) throw ConfigError(p, "unknown stage '" + n + "'");
            s.stages.push_back(n);
        }
    } else {
        throw ConfigError("stages", "required field missing");
    }

    if (const auto* pl = r.array("plots")) {
        for (std::size_t i = 0; i < pl->size(); ++i) {
            std::string p = "plots[" + std::to_string(i) + "]";
            Reader q((*pl)[i], p);
            PlotSpec ps;
            ps.kind = q.str("kind", "", {"field", "curve", "tree"});
            ps.report = q.str("report", "");
            ps.output = q.str("output", "");
            if (ps.report.empty()) throw ConfigError(p + ".report", "required field missing");
            if (ps.output.empty()) throw ConfigError(p + ".output", "required field missing");
            q.finish();
            s.plots.push_back(ps);
        }
    }

    if (const auto* as = r.array("assertions")) {
        for (std::size_t i = 0; i < as->size(); ++i) {
            std::string p = "assertions[" + std::to_string(i) + "]";
            Reader q((*as)[i], p);
            Assertion a;
            a.metric = q.str("metric", "");
            if (a.metric.empty()) throw ConfigError(p + ".metric", "required field missing");
            a.op = q.str("op", "", {"<=", ">=", "<", ">", "=="});
            if (!q.has("value")) throw ConfigError(p + ".value", "required field missing");
            a.value = q.num("value", 0.0);
            q.finish();
            s.assertions.push_back(a);
        }
    }
    r.finish();
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
    }
    return parse_scenario(j);
}

// ---------------------------------------------------------------- context

struct Context::Cache {
    std::optional<BoundaryCloud> cloud;
    std::optional<DyadicTree> tree;
    std::optional<int> q0;
    std::optional<std::map<int, CubeGeometry>> geo;
    std::optional<Corona> corona;
    std::optional<int> regime;
    std::optional<RegimeGraph> graph;
    std::optional<DomainGrid> grid;
    std::optional<OperatorField> op;
    std::optional<SolutionField> solution;
    std::optional<DBetaField> dfield;
};

Context::Context(Scenario s, std::filesystem::path out, std::uint64_t seed)
    : s_(std::move(s)), out_(std::move(out)), seed_(seed), c_(std::make_unique<Cache>()) {
    std::filesystem::create_directories(out_);
}

Context::~Context() = default;

std::ofstream Context::open(const std::string& file) const {
    std::ofstream f(out_ / file);
    require(static_cast<bool>(f), ErrorKind::invalid_input, "cannot write " + (out_ / file).string());
    return f;
}

void Context::write_json(const std::string& file, const nlohmann::json& j) const {
    auto f = open(file);
    f << j.dump(2) << '\n';
}

double Context::boundary_height(double x) const {
    const DomainSpec& d = s_.domain;
    if (d.kind == "graph") return triangle_wave(x, d.slope * d.period / 4, d.period);
    if (d.kind == "sawtooth") return triangle_wave(x, d.amplitude, d.period);
    return 0.0;
}

bool Context::inside(const Vec2& X) const {
    if (s_.domain.kind == "comb") return inside_comb(X);
    return X.y() > boundary_height(X.x());
}

const BoundaryCloud& Context::cloud() {
    if (!c_->cloud) {
        const DomainSpec& d = s_.domain;
        if (d.kind == "flat")
            c_->cloud = make_line_cloud(d.half_length, d.spacing);
        else if (d.kind == "graph")
            c_->cloud = make_sawtooth_cloud(d.slope * d.period / 4, d.period, d.half_length, d.spacing);
        else if (d.kind == "sawtooth")
            c_->cloud = make_sawtooth_cloud(d.amplitude, d.period, d.half_length, d.spacing);
        else
            c_->cloud = make_comb_cloud(d.images, d.spacing);
    }
    return *c_->cloud;
}

const DyadicTree& Context::tree() {
    if (!c_->tree) c_->tree = build_dyadic(cloud(), s_.dyadic.k_min, s_.dyadic.k_max);
    return *c_->tree;
}

int Context::q0() {
    if (!c_->q0) {
        int k = s_.corona.q0_k;
        require(k >= tree().k_min && k <= tree().k_max, ErrorKind::invalid_input,
                "corona.q0.k lies outside the dyadic generations");
        c_->q0 = tree().cube_near(s_.corona.q0_center, k, cloud());
    }
    return *c_->q0;
}

namespace {
CoronaOptions corona_options(const CoronaSpec& c) {
    CoronaOptions o;
    o.eps0 = c.eps0;
    o.eps1 = c.eps1;
    o.flat_window = c.flat_window;
    o.alpha.window = c.alpha_window;
    return o;
}
} // namespace

const std::map<int, CubeGeometry>& Context::geometry() {
    if (!c_->geo) c_->geo = cube_geometry(tree(), tree().descendants(q0()), cloud(), corona_options(s_.corona));
    return *c_->geo;
}

const Corona& Context::corona() {
    if (!c_->corona) {
        auto labels = classify(geometry(), tree(), s_.corona.eps1);
        c_->corona = build_regimes(tree(), q0(), geometry(), labels, s_.corona.eps0);
    }
    return *c_->corona;
}

int Context::regime_index() {
    if (!c_->regime) {
        const Corona& C = corona();
        require(!C.regimes.empty(), ErrorKind::invalid_input, "no coherent regime below the chosen cube");
        int best = 0;
        for (int i = 1; i < static_cast<int>(C.regimes.size()); ++i)
            if (C.regimes[i].members.size() > C.regimes[best].members.size()) best = i;
        c_->regime = best;
    }
    return *c_->regime;
}

const RegimeGraph& Context::graph() {
    if (!c_->graph) c_->graph = build_graph(tree(), corona().regimes[regime_index()], geometry(), cloud());
    return *c_->graph;
}

const DomainGrid& Context::grid() {
    if (!c_->grid) {
        DomainGrid G = make_grid(cloud(), [this](const Vec2& X) { return inside(X); }, s_.grid.lo, s_.grid.hi, s_.grid.h);
        for (int k = 0; k < 4; ++k) G.reflect[k] = s_.grid.reflect[k];
        c_->grid = std::move(G);
    }
    return *c_->grid;
}

const OperatorField& Context::op() {
    if (!c_->op) {
        const DomainGrid& G = grid();
        OperatorField o;
        if (s_.op.kind == "rotation")
            o = rotation_operator(G, s_.op.omega, s_.op.anisotropy);
        else if (s_.op.kind == "perturbation")
            o = sparse_perturbation(G, s_.op.amplitude);
        else
            o = identity_operator(G);
        if (s_.op.mollify) o = mollify_operator(o, G);
        c_->op = std::move(o);
    }
    return *c_->op;
}

const SolutionField& Context::solution() {
    if (!c_->solution) {
        const DomainGrid& G = grid();
        const std::string& data = s_.solve.data;
        auto dirichlet = [&](int id) {
            if (!G.inside[id]) return data == "step" ? (G.node(id).x() < 0 ? 1.0 : 0.0) : 0.0;
            Vec2 X = G.node(id);
            if (data == "linear") return X.y();
            if (data == "step") return X.x() < 0 ? 1.0 : 0.0;
            return std::max(0.0, X.y());
        };
        SolveOptions o;
        o.tol = s_.solve.tol;
        c_->solution = solve(op(), G, dirichlet, {}, o);
    }
    return *c_->solution;
}

const DBetaField& Context::dfield() {
    if (!c_->dfield) {
        DBetaEvaluator E(cloud(), s_.beta);
        c_->dfield = dbeta_field(E, grid());
    }
    return *c_->dfield;
}

// ---------------------------------------------------------------- stages

void Context::run_stage(const std::string& name) {
    if (name == "dyadic") return stage_dyadic();
    if (name == "alpha") return stage_alpha();
    if (name == "corona") return stage_corona();
    if (name == "graph") return stage_graph();
    if (name == "changevar") return stage_changevar();
    if (name == "dbeta") return stage_dbeta();
    if (name == "solve") return stage_solve();
    if (name == "functional") return stage_functional();
    if (name == "counterexample") return stage_counterexample();
    fail(ErrorKind::invalid_input, "unknown stage " + name);
}

void Context::stage_dyadic() {
    const DyadicTree& T = tree();
    write_json("dyadic_tree.json", tree_to_json(T));
    metrics_["dyadic.cubes"] = static_cast<double>(T.cubes.size());
    metrics_["dyadic.a0"] = T.a0;
}

void Context::stage_alpha() {
    const DyadicTree& T = tree();
    const auto& geo = geometry();
    auto f = open("alpha.csv");
    f << "cube,k,x,y,alpha\n";
    f.precision(12);
    double amax = 0;
    for (auto& [q, g] : geo) {
        f << q << ',' << T[q].k << ',' << T[q].xq.x() << ',' << T[q].xq.y() << ',' << g.alpha << '\n';
        amax = std::max(amax, g.alpha);
    }
    metrics_["alpha.max"] = amax;
    metrics_["alpha.packing"] = packing_sum(T, q0(), [&](int q) { return geo.at(q).alpha; });
}

void Context::stage_corona() {
    const DyadicTree& T = tree();
    const Corona& C = corona();
    double spread = 0;
    bool coherent = true;
    int good = 0, bad = 0;
    for (const auto& S : C.regimes) {
        spread = std::max(spread, S.angle_spread);
        coherent = coherent && check_coherence(T, S).ok();
    }
    for (auto& [q, l] : C.labels) (l == Label::Good ? good : bad)++;
    double packing = corona_packing(T, C, q0());
    write_json("regimes.json", {{"q0", q0()},
                                {"eps0", s_.corona.eps0},
                                {"eps1", s_.corona.eps1},
                                {"good", good},
                                {"bad", bad},
                                {"packing", packing},
                                {"max_angle_spread", spread},
                                {"coherent", coherent},
                                {"regimes", regime_report(T, C)}});
    metrics_["corona.packing"] = packing;
    metrics_["corona.regimes"] = static_cast<double>(C.regimes.size());
    metrics_["corona.max_spread"] = spread;
    metrics_["corona.spread_over_eps0"] = spread / s_.corona.eps0;
    metrics_["corona.coherent"] = coherent ? 1.0 : 0.0;
}

void Context::stage_graph() {
    const RegimeGraph& G = graph();
    auto f = open("graph.csv");
    write_graph_csv(G, f);
    GraphCertificate c = certify_graph(G, tree(), geometry(), cloud(), corona_options(s_.corona));
    nlohmann::json j = certificate_json(c);
    j["regime_top"] = G.top;
    j["members"] = G.members.size();
    write_json("graph_certificate.json", j);
    metrics_["graph.lipschitz"] = c.lipschitz;
    metrics_["graph.lipschitz_over_2eps0"] = c.lipschitz / (2 * s_.corona.eps0);
    metrics_["graph.support_radius"] = c.support_radius;
    metrics_["graph.alpha_control_max"] = c.alpha_control_max;
    metrics_["graph.cone_ratio_max"] = c.cone_ratio_max;
}

void Context::stage_changevar() {
    const RegimeGraph& G = graph();
    SmoothGraph SG(G);
    FlattenMap M(SG, G.frame, G.ell_top);
    std::vector<Vec2> samples;
    for (int i = 0; i <= 32; ++i) {
        double p = G.p_top - G.ell_top + 2 * G.ell_top * i / 32;
        for (int j = 0; j <= 5; ++j)
            for (double sg : {-1.0, 1.0}) samples.emplace_back(p, sg * std::ldexp(G.ell_top, -j));
    }
    JacobianCertificate c = jacobian_certificate(M, SG, samples, 2000, seed_);
    write_json("jacobian_certificate.json", certificate_json(c));
    metrics_["changevar.bilip_lo"] = c.bilip_lo;
    metrics_["changevar.bilip_hi"] = c.bilip_hi;
    metrics_["changevar.detjac_min"] = c.detjac_min;
    metrics_["changevar.detjac_max"] = c.detjac_max;
}

void Context::stage_dbeta() {
    const DBetaField& F = dfield();
    auto f = open("dbeta_field.csv");
    write_field_csv(F, grid(), f);
    auto [lo, hi] = equivalence_range(F, grid());
    write_json("dbeta.json", {{"beta", F.beta}, {"c_beta", F.c_beta}, {"ratio_min", lo}, {"ratio_max", hi},
                              {"unresolved", F.unresolved}});
    metrics_["dbeta.ratio_min"] = lo;
    metrics_["dbeta.ratio_max"] = hi;
    metrics_["dbeta.unresolved"] = F.unresolved;
}

void Context::stage_solve() {
    const DomainGrid& G = grid();
    const SolutionField& S = solution();
    auto f = open("solution.csv");
    f << "x,y,u\n";
    f.precision(12);
    for (int id = 0; id < G.size(); ++id) {
        if (!G.inside[id]) continue;
        Vec2 X = G.node(id);
        f << X.x() << ',' << X.y() << ',' << S.u[id] << '\n';
    }
    GridOperator A(op(), G);
    bool mp = maximum_principle(A, S);
    double ell = ellipticity(op(), G);
    write_json("solve.json", {{"iterations", S.iterations},
                              {"residual", S.residual},
                              {"unknowns", A.unknowns().size()},
                              {"ellipticity", ell},
                              {"maximum_principle", mp}});
    metrics_["solve.iterations"] = S.iterations;
    metrics_["solve.residual"] = S.residual;
    metrics_["solve.maximum_principle"] = mp ? 1.0 : 0.0;
    metrics_["solve.ellipticity"] = ell;
}

void Context::stage_functional() {
    const DomainGrid& G = grid();
    const auto& fs = s_.functional;
    std::vector<Ball> balls;
    auto keep = [&](const Vec2& p) { return p.x() >= fs.x_lo && p.x() <= fs.x_hi; };
    for (double r : fs.radii) {
        auto b = boundary_balls(cloud(), keep, r, r);
        balls.insert(balls.end(), b.begin(), b.end());
    }
    require(!balls.empty(), ErrorKind::invalid_input, "no boundary ball centres inside functional.x_range");
    FunctionalReport R = green_functional(G, solution().u, dfield(), cloud(), balls);
    std::vector<double> per_r;
    nlohmann::json per = nlohmann::json::array();
    for (double r : fs.radii) {
        double m = 0;
        for (const BallValue& b : R.balls)
            if (b.r == r) m = std::max(m, b.J);
        per_r.push_back(m);
        per.push_back({{"r", r}, {"sup", m}});
    }
    auto f = open("functional.csv");
    write_functional_csv(R, f);
    nlohmann::json j = {{"sup", R.sup}, {"degraded", R.degraded}, {"balls", R.balls.size()}, {"per_radius", per}};
    if (fs.radii.size() >= 2) {
        R.fit = fit_log(fs.radii, per_r);
        j["fit"] = fit_json(R.fit);
        metrics_["functional.slope"] = R.fit.slope;
    }
    write_json("functional.json", j);
    metrics_["functional.sup"] = R.sup;
    metrics_["functional.degraded"] = R.degraded ? 1.0 : 0.0;
}

void Context::stage_counterexample() {
    const auto& c = s_.counterexample;
    CounterexampleReport R = counterexample_driver(c.k, c.beta, c.radii, c.h, c.t0);
    write_json("counterexample.json", counterexample_json(R));
    metrics_["counterexample.slope"] = R.fit.slope;
    metrics_["counterexample.fit_residual"] = R.fit.residual;
    metrics_["counterexample.increasing"] = R.increasing ? 1.0 : 0.0;
    metrics_["counterexample.separation"] = R.separation;
    metrics_["counterexample.C"] = R.C_band;
    metrics_["counterexample.excluded_fraction"] = R.excluded_fraction;
}

std::vector<AssertionResult> Context::check_assertions() const {
    std::vector<AssertionResult> out;
    for (const Assertion& a : s_.assertions) {
        AssertionResult r;
        r.a = a;
        auto it = metrics_.find(a.metric);
        if (it != metrics_.end()) {
            r.found = true;
            r.actual = it->second;
            double v = r.actual;
            if (a.op == "<=") r.pass = v <= a.value;
            else if (a.op == ">=") r.pass = v >= a.value;
            else if (a.op == "<") r.pass = v < a.value;
            else if (a.op == ">") r.pass = v > a.value;
            else r.pass = v == a.value;
        }
        out.push_back(r);
    }
    return out;
}

void Context::write_plots() {
    for (const PlotSpec& p : s_.plots) {
        std::ofstream f(out_ / p.output);
        require(static_cast<bool>(f), ErrorKind::invalid_input, "cannot write " + (out_ / p.output).string());
        f << plot_file((out_ / p.report).string(), p.kind);
    }
}

RunResult run_scenario(const Scenario& s, const std::filesystem::path& out, std::uint64_t seed) {
    Context ctx(s, out, seed);
    for (const std::string& st : s.stages) ctx.run_stage(st);
    ctx.write_plots();
    RunResult R;
    R.assertions = ctx.check_assertions();
    nlohmann::json m = nlohmann::json::object();
    for (auto& [k, v] : ctx.metrics()) m[k] = v;
    nlohmann::json as = nlohmann::json::array();
    for (const auto& r : R.assertions)
        as.push_back({{"metric", r.a.metric}, {"op", r.a.op}, {"value", r.a.value}, {"actual", r.found ? nlohmann::json(r.actual) : nlohmann::json()},
                      {"pass", r.pass}});
    std::ofstream f(out / "report.json");
    f << nlohmann::json{{"scenario", s.name}, {"metrics", m}, {"assertions", as}, {"ok", R.ok()}}.dump(2) << '\n';
    return R;
}

} // namespace urg::app
