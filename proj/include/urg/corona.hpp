#pragma once

// Good/Bad classification of dyadic cubes and the stopping-time partition of
// the Good cubes into coherent regimes.

#include "urg/transport.hpp"

#include <set>

namespace urg {

struct CoronaOptions {
    double eps0 = 0.05;
    double eps1 = 0.0025;
    double flat_window = 999.0;  // flatness is tested on flat_window * Delta_Q
    AlphaOptions alpha{};
};

/// Per-cube alpha number, minimizing flat measure and two-sided flatness.
struct CubeGeometry {
    double alpha = 0.0;
    FlatMeasure plane{};
    double flatness = 0.0;  // sup dist(y, P_Q) + sup dist(p, boundary), in absolute length
};

/// sup over cloud points of flat_window*Delta_Q of dist(y, P), plus sup over P inside
/// flat_window*B_Q of the distance to the sampled boundary.
inline double flatness(const DyadicTree& T, int q, const BoundaryCloud& cloud, const FlatMeasure& P, double window) {
    const DyadicCube& Q = T[q];
    double R = window * Q.ell();
    double s1 = 0;
    for (int i : cloud.index().radius(Q.xq, R)) s1 = std::max(s1, P.distance(cloud.points[i]));
    double s2 = 0;
    Vec2 foot = P.project(Q.xq);
    double d = (foot - Q.xq).norm();
    if (d < R) {
        double L = std::sqrt(R * R - d * d);
        double step = std::max(0.5 * cloud.mean_spacing(), L * 1e-5);
        int n = static_cast<int>(std::ceil(2 * L / step));
        for (int k = 0; k <= n; ++k) {
            Vec2 p = foot + (-L + 2 * L * k / std::max(n, 1)) * P.dir();
            s2 = std::max(s2, cloud.distance(p).second);
        }
    }
    return s1 + s2;
}

/// Geometry of every cube in the listed set (alpha window and flatness window in units of l(Q)).
inline std::map<int, CubeGeometry> cube_geometry(const DyadicTree& T, const std::vector<int>& cubes,
                                                 const BoundaryCloud& cloud, const CoronaOptions& o) {
    std::map<int, CubeGeometry> g;
    for (int q : cubes) {
        AlphaResult a = alpha(T, q, cloud, o.alpha);
        CubeGeometry c;
        c.alpha = a.alpha;
        c.plane = a.mu;
        c.flatness = flatness(T, q, cloud, a.mu, o.flat_window);
        g[q] = c;
    }
    return g;
}

enum class Label { Good, Bad };

struct CoherentRegime {
    int top = -1;
    std::vector<int> members;  // sorted cube ids
    std::vector<int> minimal;  // members whose children are out
    FlatMeasure plane{};       // P = P_{Q(S)}
    double angle_spread = 0.0;
};

struct Corona {
    int root = -1;
    std::map<int, Label> labels;
    std::vector<CoherentRegime> regimes;
    std::map<int, int> regime_of;  // Good cube -> regime index
};

inline std::map<int, Label> classify(const std::map<int, CubeGeometry>& geo, const DyadicTree& T, double eps1) {
    std::map<int, Label> lab;
    for (auto& [q, g] : geo) {
        bool good = g.alpha <= eps1 && g.flatness <= eps1 * T[q].ell();
        if (eps1 <= 0) good = false;
        lab[q] = good ? Label::Good : Label::Bad;
    }
    return lab;
}

/// Signed angle gap from the reference line, in (-pi/2, pi/2].
inline double signed_angle(double theta, double ref) {
    double d = std::fmod(theta - ref, kPi);
    if (d > kPi / 2) d -= kPi;
    if (d <= -kPi / 2) d += kPi;
    return d;
}

/// Top-down greedy stopping time over the descendants of `root`: a regime starts at each
/// unassigned Good cube (coarsest first) and absorbs children while all of them are Good and
/// within eps0/2 of the top plane.
inline Corona build_regimes(const DyadicTree& T, int root, const std::map<int, CubeGeometry>& geo,
                            const std::map<int, Label>& labels, double eps0) {
    Corona C;
    C.root = root;
    C.labels = labels;
    std::vector<int> cubes = T.descendants(root);
    std::stable_sort(cubes.begin(), cubes.end(), [&](int a, int b) { return T[a].k < T[b].k; });
    auto good = [&](int q) {
        auto it = labels.find(q);
        return it != labels.end() && it->second == Label::Good;
    };
    for (int q : cubes) {
        if (!good(q) || C.regime_of.count(q)) continue;
        CoherentRegime S;
        S.top = q;
        S.plane = geo.at(q).plane;
        int idx = static_cast<int>(C.regimes.size());
        std::vector<int> stack{q};
        double lo = 0, hi = 0;
        while (!stack.empty()) {
            int m = stack.back();
            stack.pop_back();
            S.members.push_back(m);
            C.regime_of[m] = idx;
            double a = signed_angle(geo.at(m).plane.theta, S.plane.theta);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
            const auto& ch = T[m].children;
            bool take = !ch.empty();
            for (int c : ch)
                if (!good(c) || C.regime_of.count(c) ||
                    line_angle_gap(geo.at(c).plane.theta, S.plane.theta) > eps0 / 2)
                    take = false;
            if (take)
                for (int c : ch) stack.push_back(c);
            else
                S.minimal.push_back(m);
        }
        std::sort(S.members.begin(), S.members.end());
        std::sort(S.minimal.begin(), S.minimal.end());
        S.angle_spread = hi - lo;
        C.regimes.push_back(std::move(S));
    }
    return C;
}

struct CoherenceReport {
    bool a = true, b = true, c = true;
    bool ok() const { return a && b && c; }
};

/// Direct set checks of the three coherence properties.
inline CoherenceReport check_coherence(const DyadicTree& T, const CoherentRegime& S) {
    CoherenceReport r;
    std::set<int> mem(S.members.begin(), S.members.end());
    for (int q : S.members) {
        if (!T.contains(S.top, q)) r.a = false;
        for (int a = q; a != S.top && a >= 0; a = T[a].parent)
            if (!mem.count(a)) r.b = false;
        const auto& ch = T[q].children;
        int in = 0;
        for (int c : ch) in += mem.count(c) ? 1 : 0;
        if (in != 0 && in != static_cast<int>(ch.size())) r.c = false;
    }
    return r;
}

/// (sum of sigma over Bad cubes and regime tops inside Q0) / sigma(Q0).
inline double corona_packing(const DyadicTree& T, const Corona& C, int q0) {
    double s = 0;
    for (int q : T.descendants(q0)) {
        auto it = C.labels.find(q);
        if (it != C.labels.end() && it->second == Label::Bad) s += T[q].sigma;
    }
    for (const auto& S : C.regimes)
        if (T.contains(q0, S.top)) s += T[S.top].sigma;
    return s / T[q0].sigma;
}

inline nlohmann::json regime_report(const DyadicTree& T, const Corona& C) {
    nlohmann::json arr = nlohmann::json::array();
    double total = T[C.root].sigma;
    for (const auto& S : C.regimes)
        arr.push_back({{"top", S.top},
                       {"size", S.members.size()},
                       {"angle_spread", S.angle_spread},
                       {"packing_contribution", T[S.top].sigma / total}});
    return arr;
}

} // namespace urg
