#pragma once

// Carleson functionals of log-gradients: per-ball values of
// |grad u/u - grad D/D|^2 D, the regime-localized chain with its bridge terms,
// the prevalence density and the comb divergence driver.

#include "urg/changevar.hpp"
#include "urg/cutoff.hpp"

namespace urg {

struct BallValue {
    Vec2 c = Vec2::Zero();
    double r = 0.0;
    double J = 0.0;
    double excluded_fraction = 0.0;
    int nodes = 0;
};

struct LogFit {
    double slope = 0.0, intercept = 0.0;
    double residual = 0.0;  // max |J - fit| / (max J - min J)
};

struct FunctionalReport {
    std::vector<BallValue> balls;
    double sup = 0.0;
    bool degraded = false;  // some ball excluded more than 1% of its nodes
    LogFit fit;
};

/// Least-squares fit of values against ln r.
inline LogFit fit_log(const std::vector<double>& r, const std::vector<double>& v) {
    LogFit f;
    const double n = static_cast<double>(r.size());
    if (r.size() < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        double x = std::log(r[i]);
        sx += x, sy += v[i], sxx += x * x, sxy += x * v[i];
    }
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    double worst = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        worst = std::max(worst, std::abs(v[i] - (f.intercept + f.slope * std::log(r[i]))));
    f.residual = hi > lo ? worst / (hi - lo) : 0.0;
    return f;
}

namespace detail {

inline double log_gradient_gap(const DomainGrid& G, const std::vector<double>& u, const DBetaField& D, int id) {
    Vec2 gu = node_gradient(G, u, id) / u[id];
    Vec2 gd = D.grad[id] / D.D[id];
    return (gu - gd).squaredNorm() * D.D[id];
}

} // namespace detail

/// J(B) = sigma(B cap boundary)^{-1} sum over inside nodes of B with delta > 2h of
/// |grad u/u - grad D/D|^2 D dA. Nodes with u below 1e-14 max u or unresolved D are excluded.
inline FunctionalReport green_functional(const DomainGrid& G, const std::vector<double>& u, const DBetaField& D,
                                         const BoundaryCloud& cloud, const std::vector<Ball>& balls) {
    double umax = 0;
    for (int id = 0; id < G.size(); ++id)
        if (G.inside[id]) umax = std::max(umax, u[id]);
    const double floor_u = 1e-14 * umax;
    FunctionalReport R;
    for (const Ball& B : balls) {
        BallValue v;
        v.c = B.c, v.r = B.r;
        int i0 = std::max(0, static_cast<int>(std::floor((B.c.x() - B.r - G.x0) / G.h)));
        int i1 = std::min(G.nx - 1, static_cast<int>(std::ceil((B.c.x() + B.r - G.x0) / G.h)));
        int j0 = std::max(0, static_cast<int>(std::floor((B.c.y() - B.r - G.y0) / G.h)));
        int j1 = std::min(G.ny - 1, static_cast<int>(std::ceil((B.c.y() + B.r - G.y0) / G.h)));
        int cand = 0, excl = 0;
        double s = 0;
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                int id = G.id(i, j);
                if (!G.inside[id] || G.delta[id] <= 2 * G.h) continue;
                if ((G.node(i, j) - B.c).norm() > B.r) continue;
                ++cand;
                if (!(u[id] > floor_u) || !std::isfinite(D.D[id])) {
                    ++excl;
                    continue;
                }
                s += detail::log_gradient_gap(G, u, D, id) * G.area(i, j);
                ++v.nodes;
            }
        double sig = cloud.mass_in_ball(B.c, B.r);
        v.J = sig > 0 ? s / sig : 0.0;
        v.excluded_fraction = cand > 0 ? static_cast<double>(excl) / cand : 0.0;
        if (v.excluded_fraction > 0.01) R.degraded = true;
        R.sup = std::max(R.sup, v.J);
        R.balls.push_back(v);
    }
    return R;
}

inline void write_functional_csv(const FunctionalReport& R, std::ostream& out) {
    out << "center_x,center_y,r,J,excluded_fraction\n";
    out.precision(12);
    for (const BallValue& b : R.balls)
        out << b.c.x() << ',' << b.c.y() << ',' << b.r << ',' << b.J << ',' << b.excluded_fraction << '\n';
}

inline nlohmann::json fit_json(const LogFit& f) {
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}};
}

// ---------------------------------------------------------------- regime functional

struct RegimeFunctional {
    double I = 0.0;       // |grad u/u - grad D/D|^2 delta over W(S)
    double Ip = 0.0;      // |grad u/u - N/dist(X, Lambda)|^2 delta over W(S)
    double Ipp = 0.0;     // |grad v/v - grad t/t|^2 |t| over the pull-back of W(S)
    double I_psi = 0.0;   // I weighted by psi^2 over the support of the cut-off
    double bridge_plane = 0.0;     // |grad D/D - N/dist|^2 delta over W(S)
    double bridge_jacobian = 0.0;  // |grad t/t - Jac N/dist|^2 |t| over the pull-back
    double alpha_sum = 0.0;        // sum over S of alpha_beta(Q)^2 sigma(Q)
    double sigma_top = 0.0;
    int nodes = 0;
    int unresolved_members = 0;  // members finer than the grid resolves
    bool chain_ok = false;       // I <= 2 I' + 2 bridge_plane
};

/// All integrals are returned divided by sigma(Q(S)).
inline RegimeFunctional regime_functional(const DyadicTree& T, const CoherentRegime& S, const BoundaryCloud& cloud,
                                          const DomainGrid& G, const std::vector<double>& u, const DBetaField& D,
                                          const RegimeCutoff& psi, const FlattenMap& M,
                                          const std::function<double(int)>& alpha_beta_of = nullptr) {
    RegimeFunctional R;
    require(G.h <= T[S.top].ell() / 16 * (1 + 1e-12), ErrorKind::resolution_exceeded,
            "grid spacing exceeds l(Q(S))/16");
    std::set<int> nodes;
    for (int q : S.members) {
        if (G.h > T[q].ell() / 16 * (1 + 1e-12)) {
            ++R.unresolved_members;
            continue;
        }
        for (int id : whitney_region(T, q, cloud, G, WhitneyKind::W)) nodes.insert(id);
    }
    const GraphFrame& F = M.frame();
    for (int id : nodes) {
        if (!std::isfinite(D.D[id]) || !(u[id] > 0)) continue;
        Vec2 X = G.node(id);
        Vec2 pt = M.invert(X);
        double p = pt.x(), t = pt.y();
        if (t == 0.0) continue;
        Jacobians j = M.jac(p, t);
        double bp = j.v.dp, q = 1 + bp * bp;
        Vec2 Nf(-bp / (t * q), 1 / (t * q));  // N / dist in frame coordinates
        Vec2 Np = Nf.x() * F.e + Nf.y() * F.n;
        Vec2 gu = node_gradient(G, u, id) / u[id];
        Vec2 gd = D.grad[id] / D.D[id];
        Vec2 guf(gu.dot(F.e), gu.dot(F.n));
        Vec2 gv = j.Jac * guf;  // grad(u o rho) / (u o rho)
        double det = j.Jac.determinant();
        double dA = G.area(G.col(id), G.row(id));
        double pull = std::abs(t) / det * dA;  // |t| dp dt
        double d = G.delta[id];
        R.I += (gu - gd).squaredNorm() * d * dA;
        R.Ip += (gu - Np).squaredNorm() * d * dA;
        R.Ipp += (gv - Vec2(0, 1 / t)).squaredNorm() * pull;
        R.bridge_plane += (gd - Np).squaredNorm() * d * dA;
        R.bridge_jacobian += (Vec2(0, 1 / t) - j.Jac * Nf).squaredNorm() * pull;
        ++R.nodes;
    }
    for (int id : psi.support) {
        if (!std::isfinite(D.D[id]) || !(u[id] > 0) || G.delta[id] <= 2 * G.h) continue;
        Vec2 gu = node_gradient(G, u, id) / u[id];
        Vec2 gd = D.grad[id] / D.D[id];
        R.I_psi += psi.psi[id] * psi.psi[id] * (gu - gd).squaredNorm() * G.delta[id] * G.area(G.col(id), G.row(id));
    }
    if (alpha_beta_of)
        for (int q : S.members) R.alpha_sum += std::pow(alpha_beta_of(q), 2) * T[q].sigma;
    R.sigma_top = T[S.top].sigma;
    R.chain_ok = R.I <= 2 * R.Ip + 2 * R.bridge_plane + 1e-12 * (R.I + 1);
    for (double* v : {&R.I, &R.Ip, &R.Ipp, &R.I_psi, &R.bridge_plane, &R.bridge_jacobian, &R.alpha_sum})
        *v /= R.sigma_top;
    return R;
}

inline nlohmann::json regime_functional_json(const RegimeFunctional& R) {
    return {{"I", R.I},
            {"I_prime", R.Ip},
            {"I_second", R.Ipp},
            {"I_psi", R.I_psi},
            {"bridge_plane", R.bridge_plane},
            {"bridge_jacobian", R.bridge_jacobian},
            {"alpha_sum", R.alpha_sum},
            {"nodes", R.nodes},
            {"unresolved_members", R.unresolved_members},
            {"chain_ok", R.chain_ok}};
}

// ---------------------------------------------------------------- prevalence

/// Density of bad pairs (y, t) in (boundary cap B(x, r)) x (t_min, r) on a log-t grid with
/// 16 levels per decade: a pair is bad when the functional over
/// W_K(y, t) = {X in B(y, t): delta(X) >= t/K} is at least eps t. Returns
/// sum_bad sigma(y) d(ln t) / r.
inline double prevalence_density(const DomainGrid& G, const std::vector<double>& u, const DBetaField& D,
                                 const BoundaryCloud& cloud, double eps, double K, const Vec2& x, double r,
                                 double t_min) {
    require(t_min > 0 && t_min < r && K > 0, ErrorKind::invalid_input, "bad prevalence window");
    // boundary net: bin cloud points in B(x, r) at spacing t_min / 2
    const double s = t_min / 2;
    std::map<std::pair<long, long>, std::pair<Vec2, double>> bins;
    for (int i : cloud.index().radius(x, r)) {
        const Vec2& y = cloud.points[i];
        auto key = std::make_pair(static_cast<long>(std::floor(y.x() / s)), static_cast<long>(std::floor(y.y() / s)));
        auto it = bins.find(key);
        if (it == bins.end()) bins.emplace(key, std::make_pair(y, cloud.weights[i]));
        else it->second.second += cloud.weights[i];
    }
    double umax = 0;
    for (int id = 0; id < G.size(); ++id)
        if (G.inside[id]) umax = std::max(umax, u[id]);
    const int per_decade = 16;
    const int levels = static_cast<int>(std::ceil(per_decade * std::log10(r / t_min) - 1e-9));
    double bad = 0;
    for (auto& [key, yw] : bins) {
        const Vec2& y = yw.first;
        for (int l = 0; l < levels; ++l) {
            double ta = t_min * std::pow(10.0, static_cast<double>(l) / per_decade);
            double tb = std::min(r, t_min * std::pow(10.0, static_cast<double>(l + 1) / per_decade));
            double t = std::sqrt(ta * tb);
            double Fv = 0;
            if (eps > 0) {
                int i0 = std::max(0, static_cast<int>(std::floor((y.x() - t - G.x0) / G.h)));
                int i1 = std::min(G.nx - 1, static_cast<int>(std::ceil((y.x() + t - G.x0) / G.h)));
                int j0 = std::max(0, static_cast<int>(std::floor((y.y() - t - G.y0) / G.h)));
                int j1 = std::min(G.ny - 1, static_cast<int>(std::ceil((y.y() + t - G.y0) / G.h)));
                for (int j = j0; j <= j1; ++j)
                    for (int i = i0; i <= i1; ++i) {
                        int id = G.id(i, j);
                        if (!G.inside[id] || G.delta[id] < t / K || G.delta[id] <= 2 * G.h) continue;
                        if ((G.node(i, j) - y).norm() > t) continue;
                        if (!(u[id] > 1e-14 * umax) || !std::isfinite(D.D[id])) continue;
                        Fv += detail::log_gradient_gap(G, u, D, id) * G.area(i, j);
                    }
            }
            if (Fv >= eps * t) bad += yw.second * std::log(tb / ta);
        }
    }
    return bad / r;
}

// ---------------------------------------------------------------- comb divergence

struct CounterexampleReport {
    int level = 0;
    double beta = 1.0;
    std::vector<double> radii, J;
    LogFit fit;
    bool increasing = false;
    double separation = 0.0;  // min over the band of t |d_t G/G - d_t D/D|
    double t0 = 0.0;
    double band_hi = 0.0;
    double G_min = kInf, G_max = 0.0, C_band = 0.0;  // over t in [1, 64]
    double excluded_fraction = 0.0;
    int iterations = 0;
};

namespace detail {

/// Number of images of a strip node (x in [0, 1]) under even 2-periodic reflection with
/// |x'| <= w.
inline int image_count(double x, double w) {
    auto count = [&](double s) {
        long lo = static_cast<long>(std::ceil((-w - s) / 2 - 1e-12));
        long hi = static_cast<long>(std::floor((w - s) / 2 + 1e-12));
        return static_cast<int>(std::max(0L, hi - lo + 1));
    };
    return count(x) + count(-x);
}

} // namespace detail

/// Comb Green function with pole at infinity against D_beta of the comb: J(B_r) over balls
/// centred at (0, 1/2), the separation band and the boundedness band.
inline CounterexampleReport counterexample_driver(int k, double beta, const std::vector<double>& radii,
                                                  double h = 1.0 / 64, double t0 = 2.0, double cloud_spacing = 1.0 / 128) {
    require(!radii.empty(), ErrorKind::invalid_input, "no radii given");
    double rmax = *std::max_element(radii.begin(), radii.end());
    require(2 * rmax <= std::ldexp(1.0, k), ErrorKind::invalid_input,
            "truncation level too small for the largest radius (need 2^k >= 2 r)");
    CounterexampleReport R;
    R.level = k;
    R.beta = beta;
    R.radii = radii;
    CombGreen CG = green_infinity_comb(k, h, rmax + 8);
    R.iterations = CG.field.iterations;
    const DomainGrid& G = CG.grid;
    const std::vector<double>& g = CG.field.u;

    // D_beta: explicit diamonds |m| <= 3, two-point far field up to the rays
    int far_to = static_cast<int>(std::ceil(rmax)) + 8;
    BoundaryCloud near = make_comb_cloud(3, cloud_spacing, far_to);
    DBetaEvaluator E(near, beta, comb_far_field(4, far_to));
    // boundary measure of the balls: explicit diamonds far enough
    BoundaryCloud wide = make_comb_cloud(static_cast<int>(std::ceil(rmax / 2)) + 2, cloud_spacing);

    const Vec2 c(0.0, 0.5);
    std::vector<double> sums(radii.size(), 0.0);
    long cand = 0, excl = 0;
    R.separation = kInf;
    R.band_hi = rmax / 2;
    for (int id = 0; id < G.size(); ++id) {
        if (!G.inside[id]) continue;
        Vec2 X = G.node(id);
        double t = X.y();
        if (t >= 1 - 1e-12 && t <= 64 + 1e-12) {
            R.G_min = std::min(R.G_min, g[id]);
            R.G_max = std::max(R.G_max, g[id]);
        }
        bool in_band = t >= t0 - 1e-12 && t <= R.band_hi + 1e-12;
        bool in_ball = std::abs(t - c.y()) <= rmax;
        if (G.delta[id] <= 2 * G.h || (!in_band && !in_ball)) continue;
        if (!(G.delta[id] > E.min_delta())) continue;
        DBetaValue dv = E.eval_unchecked(X);
        Vec2 gu = node_gradient(G, g, id);
        if (in_band) R.separation = std::min(R.separation, t * std::abs(gu.y() / g[id] - dv.grad.y() / dv.D));
        if (!in_ball) continue;
        bool ok = g[id] > 0;
        double val = ok ? (gu / g[id] - dv.grad / dv.D).squaredNorm() * dv.D * G.area(G.col(id), G.row(id)) : 0.0;
        for (std::size_t b = 0; b < radii.size(); ++b) {
            double dy = t - c.y();
            if (std::abs(dy) > radii[b]) continue;
            int m = detail::image_count(X.x(), std::sqrt(radii[b] * radii[b] - dy * dy));
            if (m == 0) continue;
            if (b + 1 == radii.size() || radii[b] == rmax) {
                cand += m;
                if (!ok) excl += m;
            }
            sums[b] += m * val;
        }
    }
    for (std::size_t b = 0; b < radii.size(); ++b) R.J.push_back(sums[b] / wide.mass_in_ball(c, radii[b]));
    R.fit = fit_log(radii, R.J);
    std::vector<std::size_t> order(radii.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
    R.increasing = true;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (!(R.J[order[i]] > R.J[order[i - 1]])) R.increasing = false;
    R.C_band = std::max(R.G_max, 1 / R.G_min);
    R.excluded_fraction = cand > 0 ? static_cast<double>(excl) / cand : 0.0;
    R.t0 = t0;
    return R;
}

inline nlohmann::json counterexample_json(const CounterexampleReport& R) {
    return {{"level", R.level},
            {"beta", R.beta},
            {"radii", R.radii},
            {"J", R.J},
            {"fit", fit_json(R.fit)},
            {"increasing", R.increasing},
            {"separation", {{"epsilon", R.separation}, {"t0", R.t0}, {"t1", R.band_hi}}},
            {"boundedness", {{"G_min", R.G_min}, {"G_max", R.G_max}, {"C", R.C_band}}},
            {"excluded_fraction", R.excluded_fraction},
            {"cg_iterations", R.iterations}};
}

} // namespace urg
