#pragma once

// Local Wasserstein distances, Tolsa alpha numbers, their ancestor-smoothed
// variants and Carleson packing sums.

#include "urg/boundary.hpp"
#include "urg/lp.hpp"

#include <numeric>
#include <unordered_map>

namespace urg {

struct WeightedPoints {
    std::vector<Vec2> x;
    std::vector<double> w;

    void add(const Vec2& p, double m) {
        x.push_back(p);
        w.push_back(m);
    }
    double mass() const { return std::accumulate(w.begin(), w.end(), 0.0); }
};

struct LipWindow {
    Vec2 y = Vec2::Zero();
    double s = 1.0;
};

/// mu = c * (length measure on the line {X : X.nu = offset}), nu = (-sin th, cos th).
struct FlatMeasure {
    double theta = 0.0;
    double offset = 0.0;
    double c = 1.0;

    Vec2 dir() const { return {std::cos(theta), std::sin(theta)}; }
    Vec2 normal() const { return {-std::sin(theta), std::cos(theta)}; }
    double distance(const Vec2& X) const { return std::abs(X.dot(normal()) - offset); }
    Vec2 project(const Vec2& X) const { return X - (X.dot(normal()) - offset) * normal(); }
};

struct LipOptions {
    int knn = 12;
    double near_fraction = 1.0 / 8.0;  // all pairs within s * near_fraction are constrained
    int dim = 2;
    bool all_pairs = false;
};

namespace detail {

/// Signed masses mu - sigma on the union of supports, restricted to the open window.
struct SignedNodes {
    std::vector<Vec2> x;
    std::vector<double> m, cap;
};

inline SignedNodes signed_nodes(const WeightedPoints& mu, const WeightedPoints& sigma, const LipWindow& w) {
    struct Key {
        double a, b;
        bool operator<(const Key& o) const { return a < o.a || (a == o.a && b < o.b); }
    };
    std::vector<std::pair<Key, double>> all;
    auto push = [&](const WeightedPoints& P, double sign) {
        for (std::size_t i = 0; i < P.x.size(); ++i) {
            double cap = w.s - (P.x[i] - w.y).norm();
            if (cap > 0 && P.w[i] != 0.0) all.push_back({{P.x[i].x(), P.x[i].y()}, sign * P.w[i]});
        }
    };
    push(mu, 1.0);
    push(sigma, -1.0);
    std::sort(all.begin(), all.end(), [](const auto& p, const auto& q) { return p.first < q.first; });
    SignedNodes out;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        double m = 0;
        while (j < all.size() && !(all[i].first < all[j].first) && !(all[j].first < all[i].first)) m += all[j++].second;
        Vec2 p(all[i].first.a, all[i].first.b);
        if (m != 0.0) {
            out.x.push_back(p);
            out.m.push_back(m);
            out.cap.push_back(w.s - (p - w.y).norm());
        }
        i = j;
    }
    return out;
}

inline std::vector<std::pair<int, int>> constraint_pairs(const std::vector<Vec2>& x, double s, const LipOptions& o) {
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(x.size());
    if (o.all_pairs) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
        return pairs;
    }
    KdTree tree(x);
    for (int i = 0; i < n; ++i) {
        for (int j : tree.knn(x[i], o.knn + 1))
            if (j != i) pairs.push_back({std::min(i, j), std::max(i, j)});
        for (int j : tree.radius(x[i], s * o.near_fraction))
            if (j != i) pairs.push_back({std::min(i, j), std::max(i, j)});
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

} // namespace detail

/// s^{-n} sup { sum f_i m_i : |f_i - f_j| <= |x_i - x_j|, |f_i| <= (s - |x_i - y|)_+ },
/// solved through its min-cost transshipment dual. The flow starts on a sparse pair set;
/// pairs violated by the optimal potentials are added until none remain.
inline double lip_distance(const WeightedPoints& mu, const WeightedPoints& sigma, const LipWindow& w,
                           const LipOptions& o = {}) {
    require(w.s > 0, ErrorKind::invalid_input, "window radius must be positive");
    auto nodes = detail::signed_nodes(mu, sigma, w);
    const int n = static_cast<int>(nodes.x.size());
    if (n == 0) return 0.0;
    const int ground = n;
    auto pairs = detail::constraint_pairs(nodes.x, w.s, o);
    for (;;) {
        MinCostFlow flow(n + 1);
        double total = 0;
        for (int i = 0; i < n; ++i) {
            flow.set_supply(i, nodes.m[i]);
            total += nodes.m[i];
            flow.add_arc(i, ground, nodes.cap[i]);
            flow.add_arc(ground, i, nodes.cap[i]);
        }
        flow.set_supply(ground, -total);
        for (auto [i, j] : pairs) {
            double d = (nodes.x[i] - nodes.x[j]).norm();
            flow.add_arc(i, j, d);
            flow.add_arc(j, i, d);
        }
        double v = flow.solve();
        if (o.all_pairs) return std::max(0.0, v) / std::pow(w.s, o.dim);
        const auto& pot = flow.potentials();
        std::vector<std::pair<int, int>> added;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double d = (nodes.x[i] - nodes.x[j]).norm();
                if (std::abs(pot[i] - pot[j]) > d + 1e-12 * w.s) added.push_back({i, j});
            }
        if (added.empty()) return std::max(0.0, v) / std::pow(w.s, o.dim);
        std::size_t mid = pairs.size();
        pairs.insert(pairs.end(), added.begin(), added.end());
        std::inplace_merge(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(mid), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    }
}

/// Same LP solved by the dense simplex; used to validate the flow solver on small instances.
inline double lip_distance_simplex(const WeightedPoints& mu, const WeightedPoints& sigma, const LipWindow& w,
                                   const LipOptions& o = {}) {
    auto nodes = detail::signed_nodes(mu, sigma, w);
    const int n = static_cast<int>(nodes.x.size());
    if (n == 0) return 0.0;
    auto pairs = detail::constraint_pairs(nodes.x, w.s, o);
    // g = f + cap >= 0
    const int rows = n + 2 * static_cast<int>(pairs.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, n);
    Eigen::VectorXd b(rows), c(n);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        A(r, i) = 1;
        b[r++] = 2 * nodes.cap[i];
        c[i] = nodes.m[i];
    }
    for (auto [i, j] : pairs) {
        double d = (nodes.x[i] - nodes.x[j]).norm();
        A(r, i) = 1, A(r, j) = -1, b[r++] = std::max(0.0, d + nodes.cap[i] - nodes.cap[j]);
        A(r, j) = 1, A(r, i) = -1, b[r++] = std::max(0.0, d + nodes.cap[j] - nodes.cap[i]);
    }
    LpResult res = simplex_max(A, b, c, std::string(rows, '<'));
    if (res.status != LpStatus::optimal) return 0.0;
    double shift = 0;
    for (int i = 0; i < n; ++i) shift += nodes.m[i] * nodes.cap[i];
    return std::max(0.0, res.value - shift) / std::pow(w.s, o.dim);
}

// ---------------------------------------------------------------- alpha numbers

struct AlphaOptions {
    double window = 1000.0;  // Lip window radius in units of l(Q)
    int bins = 16;           // measures are aggregated on cells of size s / bins
    int coarse_bins = 8;
    int grid_theta = 6, grid_offset = 6, grid_c = 3;
    int nm_iterations = 200;
    double nm_tolerance = 1e-8;      // simplex size, in parameter units
    double nm_rel_tolerance = 1e-3;  // spread of simplex values relative to the best value
    LipOptions lip{};
};

struct AlphaResult {
    double alpha = 0.0;
    FlatMeasure mu{};
    int evaluations = 0;
};

/// Cloud restricted to the closed window, with the mean spacing of the points used.
struct WindowSample {
    LipWindow w;
    std::vector<int> idx;
    WeightedPoints sigma;
    double spacing = 0.0;
    std::vector<std::pair<Vec2, Vec2>> segments;  // chain segments touching the window
};

inline WindowSample window_sample(const BoundaryCloud& cloud, const Vec2& y, double s) {
    WindowSample ws;
    ws.w = {y, s};
    ws.idx = cloud.index().radius(y, s);
    for (int i : ws.idx) ws.sigma.add(cloud.points[i], cloud.weights[i]);
    double sum = 0;
    int cnt = 0;
    for (int i : ws.idx) {
        int j = cloud.chain_neighbor(i, 1);
        if (j >= 0) {
            ws.segments.push_back({cloud.points[i], cloud.points[j]});
            sum += (cloud.points[j] - cloud.points[i]).norm();
            ++cnt;
        }
    }
    ws.spacing = cnt > 0 ? sum / cnt : cloud.mean_spacing();
    if (!(ws.spacing > 0)) ws.spacing = s / 64;
    return ws;
}

/// Discretize c * mu_P inside the window at the projections of the window points,
/// gaps filled to the sample spacing, each node weighted by c times its Voronoi length.
inline WeightedPoints discretize_flat(const FlatMeasure& f, const WindowSample& ws) {
    WeightedPoints out;
    const Vec2 e = f.dir();
    const Vec2 foot = f.project(ws.w.y);
    double d = (foot - ws.w.y).norm();
    if (d >= ws.w.s || f.c <= 0) return out;
    double L = std::sqrt(ws.w.s * ws.w.s - d * d);
    std::vector<double> t;
    for (const Vec2& p : ws.sigma.x) {
        double u = (p - foot).dot(e);
        if (std::abs(u) < L * (1 + 1e-9)) t.push_back(std::clamp(u, -L, L));
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    // gaps of 1.5 spacings or more, including those to the chord ends, get evenly spaced fill;
    // projected gaps on a curve jitter around the spacing and must not be split
    std::vector<double> all;
    auto fill = [&](double a, double b) {
        int k = static_cast<int>(std::lround((b - a) / ws.spacing));
        for (int i = 1; i < k; ++i) all.push_back(a + (b - a) * i / k);
    };
    double prev = -L;
    for (double u : t) {
        fill(prev, u);
        all.push_back(u);
        prev = u;
    }
    fill(prev, L);
    if (all.empty()) all.push_back(0.0);
    for (std::size_t i = 0; i < all.size(); ++i) {
        double lo = i == 0 ? -L : 0.5 * (all[i - 1] + all[i]);
        double hi = i + 1 == all.size() ? L : 0.5 * (all[i] + all[i + 1]);
        out.add(foot + all[i] * e, f.c * (hi - lo));
    }
    return out;
}

/// Aggregate a measure on square cells of side `cell` anchored at `origin`; each cell
/// carries its total mass at the mass centroid.
inline WeightedPoints bin_measure(const WeightedPoints& P, const Vec2& origin, double cell) {
    struct Cell {
        Vec2 moment = Vec2::Zero();
        double mass = 0.0;
    };
    std::map<std::pair<long, long>, Cell> cells;
    for (std::size_t i = 0; i < P.x.size(); ++i) {
        Vec2 r = (P.x[i] - origin) / cell;
        auto key = std::make_pair(static_cast<long>(std::floor(r.x())), static_cast<long>(std::floor(r.y())));
        Cell& c = cells[key];
        c.moment += P.w[i] * P.x[i];
        c.mass += P.w[i];
    }
    WeightedPoints out;
    for (auto& [k, v] : cells)
        if (v.mass != 0.0) out.add(v.moment / v.mass, v.mass);
    return out;
}

/// dist_{y,s}(sigma, c mu_P) at the given binning resolution.
inline double flat_distance(const FlatMeasure& f, const WindowSample& ws, int bins, const LipOptions& o) {
    WeightedPoints mu = discretize_flat(f, ws);
    if (bins <= 0) return lip_distance(mu, ws.sigma, ws.w, o);
    // nodes on the window edge carry no weight in the LP; keep them out of the cell centroids
    auto interior = [&](const WeightedPoints& P) {
        WeightedPoints out;
        for (std::size_t i = 0; i < P.x.size(); ++i)
            if ((P.x[i] - ws.w.y).norm() < ws.w.s * (1 - 1e-9)) out.add(P.x[i], P.w[i]);
        return out;
    };
    double cell = ws.w.s / bins;
    if (cell <= ws.spacing) return lip_distance(mu, ws.sigma, ws.w, o);
    Vec2 origin = ws.w.y - Vec2(0.5 * cell, 0.5 * cell);
    return lip_distance(bin_measure(interior(mu), origin, cell), bin_measure(interior(ws.sigma), origin, cell), ws.w, o);
}

/// Weighted principal direction of the window points, with the tent-weighted density.
inline FlatMeasure pca_seed(const WindowSample& ws) {
    FlatMeasure f;
    double m = 0;
    Vec2 mean = Vec2::Zero();
    for (std::size_t i = 0; i < ws.sigma.x.size(); ++i) {
        m += ws.sigma.w[i];
        mean += ws.sigma.w[i] * ws.sigma.x[i];
    }
    if (m <= 0) return f;
    mean /= m;
    Mat2 C = Mat2::Zero();
    for (std::size_t i = 0; i < ws.sigma.x.size(); ++i) {
        Vec2 d = ws.sigma.x[i] - mean;
        C += ws.sigma.w[i] * d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat2> es(C);
    Vec2 e = es.eigenvectors().col(1);
    f.theta = wrap_angle(std::atan2(e.y(), e.x()));
    f.offset = mean.dot(f.normal());
    f.c = 1.0;
    WeightedPoints unit = discretize_flat(f, ws);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ws.sigma.x.size(); ++i)
        num += ws.sigma.w[i] * std::max(0.0, ws.w.s - (ws.sigma.x[i] - ws.w.y).norm());
    for (std::size_t i = 0; i < unit.x.size(); ++i) den += unit.w[i] * std::max(0.0, ws.w.s - (unit.x[i] - ws.w.y).norm());
    f.c = den > 0 ? num / den : 1.0;
    return f;
}

/// Nelder-Mead on R^n; returns the best point found.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& F, Eigen::VectorXd x0,
                                   const Eigen::VectorXd& step, int max_iter, double tol, double rel_tol = 0.0,
                                   double* best_value = nullptr) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> S(n + 1, x0);
    std::vector<double> V(n + 1);
    for (int i = 0; i < n; ++i) S[i + 1][i] += step[i];
    for (int i = 0; i <= n; ++i) V[i] = F(S[i]);
    std::vector<int> ord(n + 1);
    for (int it = 0; it < max_iter; ++it) {
        std::iota(ord.begin(), ord.end(), 0);
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return V[a] < V[b]; });
        double spread = 0;
        for (int i = 1; i <= n; ++i) spread = std::max(spread, (S[ord[i]] - S[ord[0]]).cwiseAbs().maxCoeff());
        if (spread < tol || V[ord[n]] - V[ord[0]] <= rel_tol * std::abs(V[ord[0]])) break;
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i) c += S[ord[i]];
        c /= n;
        int w = ord[n];
        Eigen::VectorXd xr = c + (c - S[w]);
        double fr = F(xr);
        if (fr < V[ord[0]]) {
            Eigen::VectorXd xe = c + 2 * (c - S[w]);
            double fe = F(xe);
            if (fe < fr) S[w] = xe, V[w] = fe;
            else S[w] = xr, V[w] = fr;
        } else if (fr < V[ord[n - 1]]) {
            S[w] = xr, V[w] = fr;
        } else {
            Eigen::VectorXd xc = fr < V[w] ? Eigen::VectorXd(c + 0.5 * (xr - c)) : Eigen::VectorXd(c + 0.5 * (S[w] - c));
            double fc = F(xc);
            if (fc < std::min(fr, V[w])) {
                S[w] = xc, V[w] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    S[ord[i]] = S[ord[0]] + 0.5 * (S[ord[i]] - S[ord[0]]);
                    V[ord[i]] = F(S[ord[i]]);
                }
            }
        }
    }
    int b = static_cast<int>(std::min_element(V.begin(), V.end()) - V.begin());
    if (best_value) *best_value = V[b];
    return S[b];
}

/// alpha_sigma over the window B(y, s): coarse grid around the PCA seed, then Nelder-Mead.
inline AlphaResult alpha_window(const BoundaryCloud& cloud, const Vec2& y, double s, const AlphaOptions& o = {}) {
    WindowSample ws = window_sample(cloud, y, s);
    AlphaResult best;
    if (ws.sigma.x.empty()) return best;
    FlatMeasure seed = pca_seed(ws);
    auto eval = [&](const FlatMeasure& f, int bins) {
        ++best.evaluations;
        return flat_distance(f, ws, bins, o.lip);
    };
    best.mu = seed;
    best.alpha = eval(seed, o.bins);
    if (best.alpha == 0.0) return best;

    // coarse grid, scaled to the seed's residual
    double spread = std::max(best.alpha, 1e-3);
    FlatMeasure coarse_best = seed;
    double coarse_val = eval(seed, o.coarse_bins);
    for (int a = 0; a < o.grid_theta; ++a)
        for (int b = 0; b < o.grid_offset; ++b)
            for (int k = 0; k < o.grid_c; ++k) {
                auto frac = [](int i, int n) { return n > 1 ? 2.0 * i / (n - 1) - 1.0 : 0.0; };
                FlatMeasure f;
                f.theta = wrap_angle(seed.theta + frac(a, o.grid_theta) * std::min(kPi / 2, 4 * spread));
                f.offset = seed.offset + frac(b, o.grid_offset) * s * std::min(0.5, 2 * spread);
                f.c = seed.c * (1 + frac(k, o.grid_c) * std::min(0.5, 2 * spread));
                double v = eval(f, o.coarse_bins);
                if (v < coarse_val) coarse_val = v, coarse_best = f;
            }

    auto to_measure = [&](const Eigen::VectorXd& v) {
        FlatMeasure f;
        f.theta = wrap_angle(v[0]);
        f.offset = v[1] * s;
        f.c = std::max(0.0, v[2]);
        return f;
    };
    auto objective = [&](const Eigen::VectorXd& v) {
        if (v[2] <= 0) return 1e6 + std::abs(v[2]);
        double val = eval(to_measure(v), o.bins);
        if (val < best.alpha) best.alpha = val, best.mu = to_measure(v);
        return val;
    };
    Eigen::VectorXd x0(3), step(3);
    x0 << coarse_best.theta, coarse_best.offset / s, coarse_best.c;
    step << 0.5 * std::min(kPi / 8, 2 * spread), 0.25 * std::min(0.5, spread), 0.25 * std::min(0.5, spread);
    nelder_mead(objective, x0, step, o.nm_iterations, o.nm_tolerance, o.nm_rel_tolerance);
    return best;
}

inline AlphaResult alpha(const DyadicTree& T, int q, const BoundaryCloud& cloud, const AlphaOptions& o = {}) {
    const DyadicCube& Q = T[q];
    return alpha_window(cloud, Q.xq, o.window * Q.ell(), o);
}

/// sum_k 2^{-k beta} chain[k]; levels past the end repeat the last entry.
inline double alpha_beta_series(const std::vector<double>& chain, double beta) {
    require(beta > 0, ErrorKind::invalid_input, "beta must be positive");
    if (chain.empty()) return 0.0;
    double s = 0;
    for (std::size_t k = 0; k < chain.size(); ++k) s += std::pow(2.0, -beta * static_cast<double>(k)) * chain[k];
    double r = std::pow(2.0, -beta);
    s += chain.back() * std::pow(r, static_cast<double>(chain.size())) / (1 - r);
    return s;
}

/// alpha_{sigma,beta}(Q) from per-cube alpha values (indexed by cube id).
inline double alpha_beta(const DyadicTree& T, int q, const std::vector<double>& alpha_by_cube, double beta) {
    std::vector<double> chain;
    for (int c = q; c >= 0; c = T[c].parent) chain.push_back(alpha_by_cube.at(c));
    return alpha_beta_series(chain, beta);
}

/// (1/sigma(Q0)) sum_{Q subset Q0, k(Q) <= k_max} values(Q)^2 sigma(Q).
inline double packing_sum(const DyadicTree& T, int q0, const std::function<double(int)>& values) {
    double s = 0;
    for (int q : T.descendants(q0)) {
        double v = values(q);
        s += v * v * T[q].sigma;
    }
    return s / T[q0].sigma;
}

} // namespace urg
