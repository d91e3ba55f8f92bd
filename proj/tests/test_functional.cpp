#include "urg/functional.hpp"

#include <gtest/gtest.h>

using namespace urg;

namespace {

struct HalfPlane {
    double h = 1.0 / 64;
    BoundaryCloud cloud = make_line_cloud(4, h / 4, true);
    DomainGrid G = make_grid(cloud, [](const Vec2& X) { return X.y() > 0; }, Vec2(-1, 0), Vec2(1, 1), h);
    SolutionField S = solve(identity_operator(G), G, [this](int id) { return G.node(id).y(); });
    std::vector<Ball> balls;
    HalfPlane() {
        for (double r : {0.125, 0.25, 0.5})
            for (double x = -0.5; x <= 0.5; x += r / 4) balls.push_back({Vec2(x, 0), r});
    }
    DBetaField field(double beta) const { return dbeta_field(DBetaEvaluator(cloud, beta), G); }
};

const HalfPlane& half_plane() {
    static const HalfPlane P;
    return P;
}

} // namespace

TEST(FitLog, ExactOnLogarithmicData) {
    std::vector<double> r{8, 16, 32, 64}, v;
    for (double x : r) v.push_back(2 + 3 * std::log(x));
    LogFit f = fit_log(r, v);
    EXPECT_NEAR(f.slope, 3, 1e-12);
    EXPECT_NEAR(f.intercept, 2, 1e-11);
    EXPECT_NEAR(f.residual, 0, 1e-12);
    v[1] += 1;
    EXPECT_GT(fit_log(r, v).residual, 0.05);
}

TEST(GreenFunctional, HalfPlaneVanishes) {
    const HalfPlane& P = half_plane();
    FunctionalReport R = green_functional(P.G, P.S.u, P.field(1.0), P.cloud, P.balls);
    EXPECT_LE(R.sup, 1e-6);
    EXPECT_FALSE(R.degraded);
    EXPECT_EQ(R.balls.size(), P.balls.size());
    for (const BallValue& b : R.balls) EXPECT_GT(b.nodes, 0);
}

TEST(GreenFunctional, ScalingInvariance) {
    const HalfPlane& P = half_plane();
    DBetaField D = P.field(1.0);
    std::vector<double> big = P.S.u;
    for (double& v : big) v *= 1e3;
    // a non-trivial u so that J is not zero
    std::vector<double> w(P.G.size()), wb(P.G.size());
    for (int id = 0; id < P.G.size(); ++id) {
        Vec2 X = P.G.node(id);
        w[id] = X.y() * (1 + 0.3 * std::cos(3 * X.x()) * std::exp(-3 * X.y()));
        wb[id] = 1e3 * w[id];
    }
    FunctionalReport a = green_functional(P.G, w, D, P.cloud, P.balls);
    FunctionalReport b = green_functional(P.G, wb, D, P.cloud, P.balls);
    EXPECT_GT(a.sup, 1e-4);
    for (std::size_t i = 0; i < a.balls.size(); ++i) EXPECT_NEAR(a.balls[i].J, b.balls[i].J, 1e-12 * a.sup);
    FunctionalReport c = green_functional(P.G, big, D, P.cloud, P.balls);
    EXPECT_LE(c.sup, 1e-6);
}

TEST(GreenFunctional, RobustInBeta) {
    const HalfPlane& P = half_plane();
    for (double beta : {0.5, 1.0, 2.0})
        EXPECT_LE(green_functional(P.G, P.S.u, P.field(beta), P.cloud, P.balls).sup, 1e-6) << beta;
}

TEST(Prevalence, ZeroThresholdCountsEveryPair) {
    const HalfPlane& P = half_plane();
    DBetaField D = P.field(1.0);
    const double r = 0.5, t_min = 1.0 / 16;
    double v = prevalence_density(P.G, P.S.u, D, P.cloud, 0.0, 4, Vec2(0, 0), r, t_min);
    EXPECT_NEAR(v, P.cloud.mass_in_ball(Vec2(0, 0), r) * std::log(r / t_min) / r, 1e-12);
    EXPECT_EQ(prevalence_density(P.G, P.S.u, D, P.cloud, 1e-3, 4, Vec2(0, 0), r, t_min), 0.0);
    EXPECT_THROW(prevalence_density(P.G, P.S.u, D, P.cloud, 0.0, 4, Vec2(0, 0), r, 2 * r), Error);
}

TEST(RegimeFunctional, FlatRegimeVanishes) {
    BoundaryCloud c = make_line_cloud(8.0, 1.0 / 128, true);
    DyadicTree T = build_dyadic(c, -4, 5);
    int q0 = T.cube_near(Vec2(0.3, 0), 0, c);
    CoronaOptions co;
    co.flat_window = 5;
    co.alpha.window = 6;
    auto geo = cube_geometry(T, T.descendants(q0), c, co);
    Corona C = build_regimes(T, q0, geo, classify(geo, T, co.eps1), co.eps0);
    ASSERT_EQ(C.regimes.size(), 1u);
    const CoherentRegime& S = C.regimes[0];
    GraphOptions go;
    go.flat_window = 5;
    RegimeGraph G = build_graph(T, S, geo, c, go);
    double l = T[S.top].ell();
    Vec2 xs = T[S.top].xq;
    DomainGrid grid = make_grid(c, [](const Vec2& X) { return X.y() > 0; }, xs - Vec2(3 * l, 0), xs + Vec2(3 * l, 3 * l),
                                l / 32);
    RegimeCutoff psi = build_cutoff(T, S, G, c, grid);
    SolutionField u = solve(identity_operator(grid), grid, [&](int id) { return grid.node(id).y(); });
    DBetaField D = dbeta_field(DBetaEvaluator(c, 1.0), grid);
    SmoothGraph SG(G);
    FlattenMap M(SG, G.frame, l);
    RegimeFunctional R = regime_functional(T, S, c, grid, u.u, D, psi, M, [](int) { return 0.0; });
    EXPECT_GT(R.nodes, 0);
    EXPECT_TRUE(R.chain_ok);
    EXPECT_LT(R.I, 1e-10);
    EXPECT_LT(R.Ip, 1e-10);
    EXPECT_LT(R.Ipp, 1e-10);
    EXPECT_LT(R.bridge_jacobian, 1e-10);
    EXPECT_EQ(R.alpha_sum, 0.0);
    EXPECT_GT(R.unresolved_members, 0);
}

TEST(Counterexample, ImageCountMatchesEnumeration) {
    for (double x : {0.0, 0.25, 0.5, 1.0})
        for (double w : {0.3, 1.0, 2.7, 8.0}) {
            int n = 0;
            for (int m = -20; m <= 20; ++m)
                for (double s : {x, -x})
                    if (std::abs(s + 2 * m) <= w + 1e-12) ++n;
            EXPECT_EQ(detail::image_count(x, w), n) << x << ' ' << w;
        }
}

TEST(Counterexample, SmallCombDiverges) {
    CounterexampleReport R = counterexample_driver(5, 1.0, {4, 8, 16});
    EXPECT_TRUE(R.increasing);
    EXPECT_GT(R.fit.slope, 0);
    EXPECT_GT(R.separation, 0);
    EXPECT_LE(R.C_band, 20);
    EXPECT_EQ(R.excluded_fraction, 0.0);
    EXPECT_THROW(counterexample_driver(3, 1.0, {8, 16}), Error);
    EXPECT_THROW(counterexample_driver(5, 1.0, {}), Error);
}
