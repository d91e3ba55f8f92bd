#pragma once

// Regime cut-off: a smooth function equal to 1 on the Whitney region of a
// regime and supported in its enlarged Whitney region, built from the regime
// graph, with node-wise certificates and the covering cube family of its
// transition zone.

#include "urg/graph.hpp"

namespace urg {

/// 1 on [0, 1], 0 on [2, inf), |derivative| <= 2.
inline double psi_profile(double r) { return smooth_step(r - 1); }

struct RegimeCutoff {
    std::vector<double> psi;  // per grid node
    std::vector<int> support; // nodes with psi > 0
    std::vector<int> transition;  // support nodes where the inner factor is strictly between 0 and 1
    std::vector<int> family;      // covering cubes of the transition zone
    int family_clamped = 0;       // cubes that would lie below the finest generation
    int one_violations = 0;       // nodes of W(S) with psi < 1
    int one_checked = 0;
    int support_violations = 0;   // support nodes outside W*(S)
    int cover_violations = 0;     // transition nodes outside the union of W**(Q_i)
    int overlap = 0;              // max number of doubled family cubes containing a boundary point
    double grad_ratio_max = 0.0;  // max delta |grad psi| over interior nodes
    double comparability_lo = kInf, comparability_hi = 0.0;  // delta / |X - graph point| on the support
};

namespace detail {

inline bool in_region(const DyadicTree& T, const std::vector<std::vector<int>>& members_by_gen, int gen0,
                      const BoundaryCloud& cloud, int nearest, double delta, double dil) {
    const Vec2& x = cloud.points[nearest];
    for (std::size_t g = 0; g < members_by_gen.size(); ++g) {
        double l = std::ldexp(1.0, -(gen0 + static_cast<int>(g)));
        if (!(delta > l / dil && delta <= dil * l)) continue;
        for (int q : members_by_gen[g])
            if ((x - T[q].xq).norm() <= dil * l) return true;
    }
    return false;
}

} // namespace detail

inline RegimeCutoff build_cutoff(const DyadicTree& T, const CoherentRegime& S, const RegimeGraph& G,
                                 const BoundaryCloud& cloud, const DomainGrid& grid, double Kss = kDefaultKss) {
    const double lS = T[S.top].ell();
    require(grid.h <= lS / 16 * (1 + 1e-12), ErrorKind::resolution_exceeded, "grid does not resolve the top cube");
    RegimeCutoff C;
    C.psi.assign(grid.size(), 0.0);
    std::vector<double> inner(grid.size(), 0.0), r_of(grid.size(), 0.0);
    const Vec2 xs = T[S.top].xq;
    for (int id = 0; id < grid.size(); ++id) {
        if (!grid.inside[id]) continue;
        Vec2 X = grid.node(id);
        if ((X - xs).norm() > 32 * lS) continue;
        double p = G.frame.pi(X);
        double r = (X - G.gmap(p)).norm();
        if (r <= 0) continue;
        double in = psi_profile(G.d(p) / (3 * r));
        double v = in * psi_profile(r / (2 * lS));
        C.psi[id] = v;
        inner[id] = in;
        r_of[id] = r;
        if (v > 0) {
            C.support.push_back(id);
            if (in < 1) C.transition.push_back(id);
            double ratio = grid.delta[id] / r;
            C.comparability_lo = std::min(C.comparability_lo, ratio);
            C.comparability_hi = std::max(C.comparability_hi, ratio);
        }
    }

    // sandwich W(S) <= {psi = 1}, {psi > 0} <= W*(S), checked node by node
    std::vector<std::vector<int>> by_gen(T.k_max - T[S.top].k + 1);
    std::set<int> mem(S.members.begin(), S.members.end());
    for (int q : S.members) by_gen[T[q].k - T[S.top].k].push_back(q);
    for (int id = 0; id < grid.size(); ++id) {
        if (!grid.inside[id]) continue;
        double d = grid.delta[id];
        if (d <= 0) continue;
        int k = static_cast<int>(std::floor(-std::log2(d)));
        if (std::ldexp(1.0, -k) < d) --k;  // l(Q) in [d, 2d)
        if (k < T.k_min || k > T.k_max) continue;
        if (!mem.count(T.cube_of(grid.nearest[id], k))) continue;
        ++C.one_checked;
        if (C.psi[id] < 1 - 1e-12) ++C.one_violations;
    }
    for (int id : C.support)
        if (!detail::in_region(T, by_gen, T[S.top].k, cloud, grid.nearest[id], grid.delta[id], 64.0))
            ++C.support_violations;

    // discrete gradient
    for (int j = 1; j + 1 < grid.ny; ++j)
        for (int i = 1; i + 1 < grid.nx; ++i) {
            int id = grid.id(i, j);
            int l = grid.id(i - 1, j), r = grid.id(i + 1, j), b = grid.id(i, j - 1), t = grid.id(i, j + 1);
            if (!grid.inside[id] || !grid.inside[l] || !grid.inside[r] || !grid.inside[b] || !grid.inside[t]) continue;
            double gx = (C.psi[r] - C.psi[l]) / (2 * grid.h), gy = (C.psi[t] - C.psi[b]) / (2 * grid.h);
            C.grad_ratio_max = std::max(C.grad_ratio_max, grid.delta[id] * std::hypot(gx, gy));
        }

    // Vitali family over the transition zone: balls around graph points of radius d/100
    std::vector<int> order = C.transition;
    std::vector<double> rad(grid.size(), 0.0);
    std::vector<Vec2> cen(grid.size());
    for (int id : order) {
        double p = G.frame.pi(grid.node(id));
        rad[id] = G.d(p) / 100;
        cen[id] = G.gmap(p);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rad[a] > rad[b]; });
    std::vector<int> chosen;
    for (int id : order) {
        bool ok = true;
        for (int c : chosen)
            if ((cen[id] - cen[c]).norm() < rad[id] + rad[c]) {
                ok = false;
                break;
            }
        if (ok) chosen.push_back(id);
    }
    std::set<int> fam;
    for (int id : chosen) {
        double d = 100 * rad[id];
        // l(Q_i) < d/400 <= 2 l(Q_i)
        int k = static_cast<int>(std::floor(std::log2(400 / d))) + 1;
        if (k > T.k_max) k = T.k_max, ++C.family_clamped;
        k = std::max(k, T.k_min);
        fam.insert(T.cube_of(cloud.index().nearest(cen[id]).first, k));
    }
    C.family.assign(fam.begin(), fam.end());
    for (int i = 0; i < cloud.size(); ++i) {
        int cnt = 0;
        for (int q : C.family)
            if ((cloud.points[i] - T[q].xq).norm() <= 2 * T[q].ell()) ++cnt;
        C.overlap = std::max(C.overlap, cnt);
    }
    for (int id : C.transition) {
        const Vec2& x = cloud.points[grid.nearest[id]];
        double d = grid.delta[id];
        bool covered = false;
        for (int q : C.family) {
            double l = T[q].ell();
            if (d > l / Kss && d <= Kss * l && (x - T[q].xq).norm() <= Kss * l) {
                covered = true;
                break;
            }
        }
        if (!covered) ++C.cover_violations;
    }
    return C;
}

inline nlohmann::json cutoff_json(const RegimeCutoff& C) {
    return {{"support_nodes", C.support.size()},
            {"transition_nodes", C.transition.size()},
            {"one_checked", C.one_checked},
            {"one_violations", C.one_violations},
            {"support_violations", C.support_violations},
            {"grad_ratio_max", C.grad_ratio_max},
            {"comparability", {C.comparability_lo, C.comparability_hi}},
            {"family_size", C.family.size()},
            {"family_clamped", C.family_clamped},
            {"overlap", C.overlap},
            {"cover_violations", C.cover_violations}};
}

} // namespace urg
