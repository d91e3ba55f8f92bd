#pragma once

// Small-Lipschitz graph approximating the boundary over a coherent regime:
// distance-to-regime function d, Whitney intervals of the reference line with
// their linked cubes, L1 affine fits, a smooth partition of unity and the
// assembled graph, plus the closeness certificates.

#include "urg/corona.hpp"

namespace urg {

/// Orthonormal frame of the reference line: X = origin + p e + t n.
struct GraphFrame {
    Vec2 origin = Vec2::Zero();
    Vec2 e = Vec2(1, 0);
    Vec2 n = Vec2(0, 1);

    static GraphFrame from_plane(const FlatMeasure& P, const Vec2& anchor) {
        return {P.project(anchor), P.dir(), P.normal()};
    }
    double pi(const Vec2& X) const { return (X - origin).dot(e); }
    double pi_perp(const Vec2& X) const { return (X - origin).dot(n); }
    Vec2 point(double p, double t) const { return origin + p * e + t * n; }
};

/// Affine height t = c + m p in frame coordinates.
struct AffineMap {
    double m = 0.0, c = 0.0;
    double operator()(double p) const { return c + m * p; }
};

struct WhitneyInterval {
    double a = 0.0, len = 0.0;  // R = [a, a + len)
    int link = -1;              // Q_R
    bool zero = false;          // Q_R = Q(S)
    bool fallback = false;      // empty fit window, plane of Q_R used
    double link_ratio = 0.0;    // dist(R, Pi(Q_R)) / l(R)
    AffineMap fit{};
    double center() const { return a + 0.5 * len; }
};

/// Smooth step: 1 on (-inf, 0], 0 on [1, inf), |derivative| <= 2.
inline double smooth_step(double s) {
    if (s <= 0) return 1.0;
    if (s >= 1) return 0.0;
    double f0 = std::exp(-1.0 / (1.0 - s)), f1 = std::exp(-1.0 / s);
    return f0 / (f0 + f1);
}

/// Bump of R: 1 on R, 0 off the open interval 2R.
inline double interval_bump(const WhitneyInterval& R, double p) {
    double u = std::abs(p - R.center()) / R.len;  // 1/2 at the edge of R, 1 at the edge of 2R
    return smooth_step(2 * u - 1);
}

/// Minimizes sum w_i |t_i - (c + m p_i)| by linear programming.
inline AffineMap l1_affine_fit(const std::vector<double>& p, const std::vector<double>& t, const std::vector<double>& w) {
    const int N = static_cast<int>(p.size());
    require(N > 0, ErrorKind::invalid_input, "empty L1 fit");
    double p0 = 0;
    for (double x : p) p0 += x;
    p0 /= N;
    double scale = 0;
    for (double x : p) scale = std::max(scale, std::abs(x - p0));
    if (scale <= 0) scale = 1;
    // variables: m+, m-, c+, c-, u_i, v_i with c + m (p_i - p0)/scale + u_i - v_i = t_i
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, 4 + 2 * N);
    Eigen::VectorXd b(N), obj = Eigen::VectorXd::Zero(4 + 2 * N);
    for (int i = 0; i < N; ++i) {
        double q = (p[i] - p0) / scale;
        A(i, 0) = q, A(i, 1) = -q, A(i, 2) = 1, A(i, 3) = -1;
        A(i, 4 + i) = 1, A(i, 4 + N + i) = -1;
        b[i] = t[i];
        obj[4 + i] = obj[4 + N + i] = -w[i];
    }
    LpResult r = simplex_max(A, b, obj, std::string(N, '='));
    require(r.status == LpStatus::optimal, ErrorKind::numeric_failure, "L1 affine fit did not converge");
    double ms = (r.x[0] - r.x[1]) / scale, cs = r.x[2] - r.x[3];
    return {ms, cs - ms * p0};
}

inline double l1_objective(const AffineMap& f, const std::vector<double>& p, const std::vector<double>& t,
                           const std::vector<double>& w) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += w[i] * std::abs(t[i] - f(p[i]));
    return s;
}

struct GraphOptions {
    double flat_window = 999.0;
    int min_fit_points = 8;
    int densify = 16;
    double sample_half_width = 5.0;  // sample grid covers Pi(x_Q(S)) +- this * l(Q(S))
};

struct RegimeGraph {
    GraphFrame frame;
    int top = -1;
    double ell_top = 1.0;
    double p_top = 0.0;  // Pi(x_Q(S))
    double spacing = 0.0;
    std::vector<int> members;
    std::vector<std::pair<double, double>> d_terms;  // per member: (Pi(x_Q), l(Q))
    std::vector<WhitneyInterval> W;                  // sorted by a
    double domain_lo = 0.0, domain_hi = 0.0;
    std::vector<double> samples;  // sample grid on P
    std::vector<double> b_samples, d_samples;
    int fallbacks = 0;

    double d(double p) const {
        double v = kInf;
        for (auto [c, l] : d_terms) v = std::min(v, std::max(0.0, std::abs(p - c) - 2 * l) + l);
        return v;
    }
    bool in_Z(double p) const { return d(p) < spacing / 4; }

    double b(double p) const {
        if (W.empty() || p < domain_lo || p >= domain_hi) return 0.0;
        auto it = std::upper_bound(W.begin(), W.end(), p, [](double x, const WhitneyInterval& R) { return x < R.a; });
        int i = static_cast<int>(it - W.begin()) - 1;
        double num = 0, den = 0;
        for (int j = std::max(0, i - 2); j <= std::min(static_cast<int>(W.size()) - 1, i + 2); ++j) {
            double phi = interval_bump(W[j], p);
            if (phi <= 0) continue;
            num += phi * (W[j].zero ? 0.0 : W[j].fit(p));
            den += phi;
        }
        return den > 0 ? num / den : 0.0;
    }
    /// Partition of unity values at p (interval index, weight).
    std::vector<std::pair<int, double>> partition(double p) const {
        std::vector<std::pair<int, double>> out;
        double den = 0;
        for (int j = 0; j < static_cast<int>(W.size()); ++j) {
            double phi = interval_bump(W[j], p);
            if (phi > 0) out.push_back({j, phi}), den += phi;
        }
        for (auto& [j, v] : out) v /= den;
        return out;
    }
    Vec2 gmap(double p) const { return frame.point(p, b(p)); }
};

namespace detail {

inline double interval_gap(double a0, double a1, double b0, double b1) {
    return std::max({0.0, b0 - a1, a0 - b1});
}

/// Link Q_R: the member nearly realizing the infimum of d over 3R^ (R^ the parent of R),
/// lifted to the ancestor of size 32 l(R) or to Q(S).
inline int link_cube(const DyadicTree& T, const RegimeGraph& G, const std::vector<int>& members, double a, double len) {
    double pa = std::floor(a / (2 * len)) * (2 * len);
    double lo = pa - 2 * len, hi = pa + 4 * len;
    int best = -1;
    double bv = kInf;
    for (std::size_t i = 0; i < members.size(); ++i) {
        auto [c, l] = G.d_terms[i];
        double v = interval_gap(lo, hi, c - 2 * l, c + 2 * l) + l;
        if (v < bv) bv = v, best = members[i];
    }
    if (best < 0 || 32 * len >= G.ell_top) return G.top;
    int q = best;
    while (T[q].ell() < 32 * len * (1 - 1e-12) && q != G.top) q = T[q].parent;
    return q;
}

} // namespace detail

inline RegimeGraph build_graph(const DyadicTree& T, const CoherentRegime& S, const std::map<int, CubeGeometry>& geo,
                               const BoundaryCloud& cloud, const GraphOptions& o = {}) {
    require(!S.members.empty(), ErrorKind::invalid_input, "empty regime");
    RegimeGraph G;
    G.top = S.top;
    G.ell_top = T[S.top].ell();
    G.frame = GraphFrame::from_plane(S.plane, T[S.top].xq);
    G.p_top = G.frame.pi(T[S.top].xq);
    G.spacing = cloud.mean_spacing();
    G.members = S.members;
    for (int q : S.members) G.d_terms.push_back({G.frame.pi(T[q].xq), T[q].ell()});

    // Whitney intervals: maximal dyadic R with 21 l(R) <= inf_{3R} d
    double H = std::ldexp(1.0, static_cast<int>(std::ceil(std::log2(8 * G.ell_top))));
    double floor_len = std::ldexp(1.0, -T.k_max - 10);
    G.domain_lo = std::floor((G.p_top - H) / H) * H;
    G.domain_hi = std::ceil((G.p_top + H) / H) * H;
    auto inf_d = [&](double lo, double hi) {
        double v = kInf;
        for (auto [c, l] : G.d_terms) v = std::min(v, detail::interval_gap(lo, hi, c - 2 * l, c + 2 * l) + l);
        return v;
    };
    std::function<void(double, double)> rec = [&](double a, double len) {
        if (21 * len <= inf_d(a - len, a + 2 * len)) {
            WhitneyInterval R;
            R.a = a;
            R.len = len;
            G.W.push_back(R);
            return;
        }
        if (len <= floor_len) return;  // treated as part of Z
        rec(a, len / 2);
        rec(a + len / 2, len / 2);
    };
    for (double a = G.domain_lo; a < G.domain_hi - 0.5 * H; a += H) rec(a, H);
    std::sort(G.W.begin(), G.W.end(), [](const auto& x, const auto& y) { return x.a < y.a; });

    // fit data: the flat window of Q(S)
    const Vec2 xs = T[S.top].xq;
    std::vector<int> win = cloud.index().radius(xs, o.flat_window * G.ell_top);
    std::vector<double> wp, wt, ww;
    for (int i : win) {
        wp.push_back(G.frame.pi(cloud.points[i]));
        wt.push_back(G.frame.pi_perp(cloud.points[i]));
        ww.push_back(cloud.weights[i]);
    }
    std::vector<char> in_win(cloud.size(), 0);
    for (int i : win) in_win[i] = 1;

    for (WhitneyInterval& R : G.W) {
        R.link = detail::link_cube(T, G, S.members, R.a, R.len);
        // dist(R, Pi(Q_R)) against the hull of the member projections
        double lo = kInf, hi = -kInf;
        for (int i : T[R.link].members) {
            double p = G.frame.pi(cloud.points[i]);
            lo = std::min(lo, p), hi = std::max(hi, p);
        }
        R.link_ratio = detail::interval_gap(R.a, R.a + R.len, lo, hi) / R.len;
        if (R.link == S.top) {
            R.zero = true;
            continue;
        }
        double f0 = R.center() - R.len, f1 = R.center() + R.len;
        std::vector<double> p, t, w;
        for (std::size_t k = 0; k < wp.size(); ++k)
            if (wp[k] >= f0 && wp[k] <= f1) p.push_back(wp[k]), t.push_back(wt[k]), w.push_back(ww[k]);
        if (static_cast<int>(p.size()) < o.min_fit_points) {
            // resample the chain polyline
            p.clear(), t.clear(), w.clear();
            for (int i : win) {
                int j = cloud.chain_neighbor(i, 1);
                if (j < 0 || !in_win[j]) continue;
                double pi = G.frame.pi(cloud.points[i]), pj = G.frame.pi(cloud.points[j]);
                if (std::max(pi, pj) < f0 || std::min(pi, pj) > f1) continue;
                double L = (cloud.points[j] - cloud.points[i]).norm();
                for (int k = 0; k < o.densify; ++k) {
                    Vec2 y = cloud.points[i] + (cloud.points[j] - cloud.points[i]) * ((k + 0.5) / o.densify);
                    double py = G.frame.pi(y);
                    if (py >= f0 && py <= f1) p.push_back(py), t.push_back(G.frame.pi_perp(y)), w.push_back(L / o.densify);
                }
            }
        }
        if (p.empty()) {
            const FlatMeasure& P = geo.at(R.link).plane;
            Vec2 nn = P.normal();
            double den = G.frame.n.dot(nn);
            R.fit = {-G.frame.e.dot(nn) / den, (P.offset - G.frame.origin.dot(nn)) / den};
            R.fallback = true;
            ++G.fallbacks;
            continue;
        }
        R.fit = l1_affine_fit(p, t, w);
    }

    // sample grid
    double minlen = kInf;
    for (const auto& R : G.W) minlen = std::min(minlen, R.len);
    double g = std::isfinite(minlen) ? minlen / 8 : G.ell_top / 64;
    double half = o.sample_half_width * G.ell_top;
    int n = static_cast<int>(std::ceil(2 * half / g));
    for (int k = 0; k <= n; ++k) {
        double p = G.p_top - half + k * g;
        G.samples.push_back(p);
        G.b_samples.push_back(G.b(p));
        G.d_samples.push_back(G.d(p));
    }
    return G;
}

inline void write_graph_csv(const RegimeGraph& G, std::ostream& out) {
    out << "p,b(p),d(p),in_Z\n";
    out.precision(12);
    for (std::size_t k = 0; k < G.samples.size(); ++k)
        out << G.samples[k] << ',' << G.b_samples[k] << ',' << G.d_samples[k] << ','
            << (G.d_samples[k] < G.spacing / 4 ? 1 : 0) << '\n';
}

struct GraphCertificate {
    double lipschitz = 0.0;          // max slope over sample pairs
    double support_radius = 0.0;     // max |gmap(p) on P - x_Q(S)| / l(Q(S)) over samples with b != 0
    double d_lipschitz = 0.0;        // max |d(p)-d(q)|/|p-q| over adjacent samples
    double partition_error = 0.0;    // max |sum phi_R - 1| over samples in the tiled region
    double neighbor_ratio_max = 1.0; // max l(R1)/l(R2) over intervals with overlapping 3R
    double link_ratio_max = 0.0;     // max dist(R, Pi(Q_R)) / l(R)
    double fit_slope_max = 0.0;      // max |slope| of the non-zero b_R
    double closeness_max = 0.0;       // max over members of the closeness sup / (eps1 l(Q))
    double alpha_control_max = 0.0;       // max over members of the integral / (l(Q)^2 alpha(Q))
    double cone_ratio_max = 0.0;     // max |dt| / (2 eps0 |dp|) over qualifying cloud pairs
    int fallbacks = 0;
};

inline GraphCertificate certify_graph(const RegimeGraph& G, const DyadicTree& T, const std::map<int, CubeGeometry>& geo,
                                      const BoundaryCloud& cloud, const CoronaOptions& co) {
    GraphCertificate c;
    c.fallbacks = G.fallbacks;
    const auto& s = G.samples;
    const Vec2 xs = T[G.top].xq;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
        double dp = s[k + 1] - s[k];
        c.lipschitz = std::max(c.lipschitz, std::abs(G.b_samples[k + 1] - G.b_samples[k]) / dp);
        c.d_lipschitz = std::max(c.d_lipschitz, std::abs(G.d_samples[k + 1] - G.d_samples[k]) / dp);
    }
    for (std::size_t k = 0; k < s.size(); ++k)
        if (std::abs(G.b_samples[k]) > 1e-14)
            c.support_radius = std::max(c.support_radius, (G.frame.point(s[k], 0) - xs).norm() / G.ell_top);
    for (std::size_t k = 0; k < s.size(); k += std::max<std::size_t>(1, s.size() / 2048)) {
        if (s[k] < G.domain_lo || s[k] >= G.domain_hi || G.in_Z(s[k])) continue;
        double sum = 0;
        for (auto [j, v] : G.partition(s[k])) sum += v;
        c.partition_error = std::max(c.partition_error, std::abs(sum - 1));
    }
    for (std::size_t i = 0; i < G.W.size(); ++i) {
        const auto& R = G.W[i];
        c.link_ratio_max = std::max(c.link_ratio_max, R.link_ratio);
        if (!R.zero) c.fit_slope_max = std::max(c.fit_slope_max, std::abs(R.fit.m));
        for (std::size_t j = i + 1; j < G.W.size() && G.W[j].a < R.a + 2 * R.len + 4 * G.W[j].len; ++j) {
            const auto& Q = G.W[j];
            if (detail::interval_gap(R.a - R.len, R.a + 2 * R.len, Q.a - Q.len, Q.a + 2 * Q.len) > 0) continue;
            c.neighbor_ratio_max = std::max(c.neighbor_ratio_max, std::max(R.len / Q.len, Q.len / R.len));
        }
    }
    for (int q : G.members) {
        const DyadicCube& Q = T[q];
        const FlatMeasure& P = geo.at(q).plane;
        double pq = G.frame.pi(Q.xq), l = Q.ell();
        double sup = 0;
        const int n = 256;
        for (int k = 0; k <= n; ++k) {
            double p = pq - co.flat_window * l + 2 * co.flat_window * l * k / n;
            Vec2 X = G.gmap(p);
            sup = std::max(sup, cloud.distance(X).second + P.distance(X));
        }
        if (co.eps1 > 0) c.closeness_max = std::max(c.closeness_max, sup / (co.eps1 * l));
        double a = geo.at(q).alpha;
        if (a > 1e-9) {
            double integral = 0, dp = 4 * l / n;
            for (int k = 0; k < n; ++k) integral += P.distance(G.gmap(pq - 2 * l + (k + 0.5) * dp)) * dp;
            c.alpha_control_max = std::max(c.alpha_control_max, integral / (l * l * a));
        }
    }
    // cone property over cloud pairs of the flat window
    std::vector<int> win = cloud.index().radius(xs, co.flat_window * G.ell_top);
    std::size_t stride = std::max<std::size_t>(1, win.size() / 3000);
    std::vector<double> P, Tt, D;
    for (std::size_t k = 0; k < win.size(); k += stride) {
        const Vec2& x = cloud.points[win[k]];
        P.push_back(G.frame.pi(x));
        Tt.push_back(G.frame.pi_perp(x));
        D.push_back(G.d(P.back()));
    }
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t j = 0; j < P.size(); ++j) {
            if (i == j) continue;
            double dist = std::hypot(P[i] - P[j], Tt[i] - Tt[j]);
            if (dist <= 1e-3 * D[i]) continue;
            double dp = std::abs(P[i] - P[j]), dt = std::abs(Tt[i] - Tt[j]);
            c.cone_ratio_max = std::max(c.cone_ratio_max, dp > 0 ? dt / (2 * co.eps0 * dp) : kInf);
        }
    return c;
}

inline nlohmann::json certificate_json(const GraphCertificate& c) {
    return {{"lipschitz", c.lipschitz},
            {"support_radius", c.support_radius},
            {"d_lipschitz", c.d_lipschitz},
            {"partition_error", c.partition_error},
            {"neighbor_ratio_max", c.neighbor_ratio_max},
            {"link_ratio_max", c.link_ratio_max},
            {"fit_slope_max", c.fit_slope_max},
            {"closeness_max", c.closeness_max},
            {"alpha_control_max", c.alpha_control_max},
            {"cone_ratio_max", c.cone_ratio_max},
            {"fallbacks", c.fallbacks}};
}

} // namespace urg
