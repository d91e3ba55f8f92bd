#include "urg/graph.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace urg;

namespace {

struct Regime {
    BoundaryCloud cloud;
    DyadicTree T;
    std::map<int, CubeGeometry> geo;
    CoherentRegime S;
    RegimeGraph G;
    Regime(BoundaryCloud c, Vec2 anchor) : cloud(std::move(c)), T(build_dyadic(cloud, 0, 5)) {
        CoronaOptions co;
        co.flat_window = 5;
        co.alpha.window = 6;
        int q0 = T.cube_near(anchor, 0, cloud);
        geo = cube_geometry(T, T.descendants(q0), cloud, co);
        Corona C = build_regimes(T, q0, geo, classify(geo, T, co.eps1), co.eps0);
        std::size_t bi = 0;
        for (std::size_t i = 0; i < C.regimes.size(); ++i)
            if (C.regimes[i].members.size() > C.regimes[bi].members.size()) bi = i;
        S = C.regimes.at(bi);
        GraphOptions go;
        go.flat_window = 5;
        G = build_graph(T, S, geo, cloud, go);
    }
};

const Regime& flat() {
    static const Regime R(make_line_cloud(8.0, 1.0 / 128, true), Vec2(0.3, 0));
    return R;
}

const Regime& tilted() {
    // a straight line of slope 0.1, sampled as a graph
    static const Regime R(make_graph_cloud([](double x) { return 0.1 * x; }, -8, 8, 2049, true), Vec2(0.3, 0.03));
    return R;
}

} // namespace

TEST(L1Fit, RecoversAffineData) {
    std::vector<double> p, t, w;
    for (int i = 0; i < 20; ++i) {
        p.push_back(-1 + 0.1 * i);
        t.push_back(0.3 - 0.2 * p.back());
        w.push_back(1 + 0.1 * (i % 3));
    }
    AffineMap f = l1_affine_fit(p, t, w);
    EXPECT_NEAR(f.m, -0.2, 1e-12);
    EXPECT_NEAR(f.c, 0.3, 1e-12);
    EXPECT_NEAR(l1_objective(f, p, t, w), 0.0, 1e-12);
}

TEST(L1Fit, IgnoresASingleOutlier) {
    std::vector<double> p, t, w;
    for (int i = 0; i < 101; ++i) {
        p.push_back(-1 + 0.02 * i);
        t.push_back(0.5 * p.back() + 1);
        w.push_back(1);
    }
    t[37] += 10;
    AffineMap f = l1_affine_fit(p, t, w);
    EXPECT_NEAR(f.m, 0.5, 1e-10);
    EXPECT_NEAR(f.c, 1.0, 1e-10);
}

TEST(L1Fit, NoWorseThanGridSearch) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N(0, 0.05);
    std::uniform_real_distribution<double> U(-1, 1), W(0.5, 2);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> p, t, w;
        for (int i = 0; i < 30; ++i) {
            p.push_back(U(rng));
            t.push_back(0.2 * p.back() - 0.1 + N(rng));
            w.push_back(W(rng));
        }
        double lp = l1_objective(l1_affine_fit(p, t, w), p, t, w);
        double best = kInf;
        for (int a = 0; a <= 200; ++a)
            for (int b = 0; b <= 200; ++b) {
                AffineMap g{-0.3 + 1.0 * a / 200, -0.6 + 1.0 * b / 200};
                best = std::min(best, l1_objective(g, p, t, w));
            }
        EXPECT_LE(lp, best + 1e-12);
        EXPECT_GE(lp, 0.99 * best);
    }
}

TEST(SmoothStep, ShapeAndSlope) {
    EXPECT_EQ(smooth_step(-1), 1.0);
    EXPECT_EQ(smooth_step(0), 1.0);
    EXPECT_EQ(smooth_step(1), 0.0);
    EXPECT_NEAR(smooth_step(0.5), 0.5, 1e-15);
    double prev = 1;
    for (int k = 1; k < 1000; ++k) {
        double s = k / 1000.0, v = smooth_step(s);
        EXPECT_LE(v, prev);
        EXPECT_LE((prev - v) * 1000, 2.0 + 1e-9);
        prev = v;
    }
    WhitneyInterval R;
    R.a = 1, R.len = 0.5;
    EXPECT_EQ(interval_bump(R, 1.0), 1.0);
    EXPECT_EQ(interval_bump(R, 1.2), 1.0);
    EXPECT_GT(interval_bump(R, 0.9), 0.0);
    EXPECT_EQ(interval_bump(R, 0.75), 0.0);
    EXPECT_EQ(interval_bump(R, 2.0), 0.0);
}

TEST(RegimeGraph, FlatRegimeGivesZeroGraph) {
    const Regime& R = flat();
    for (double b : R.G.b_samples) EXPECT_EQ(b, 0.0);
    for (const auto& W : R.G.W)
        if (!W.zero) EXPECT_NEAR(W.fit.m, 0.0, 1e-12);
}

TEST(RegimeGraph, DistanceFunction) {
    const Regime& R = tilted();
    const RegimeGraph& G = R.G;
    for (std::size_t k = 0; k + 1 < G.samples.size(); ++k)
        EXPECT_LE(std::abs(G.d_samples[k + 1] - G.d_samples[k]), (G.samples[k + 1] - G.samples[k]) * (1 + 1e-9));
    for (int q : G.members) {
        double c = G.frame.pi(R.T[q].xq), l = R.T[q].ell();
        for (int k = -20; k <= 20; ++k) EXPECT_LE(G.d(c + 2 * l * k / 20.0), l * (1 + 1e-12)) << q;
    }
}

TEST(RegimeGraph, WhitneyIntervalsTileTheLine) {
    const RegimeGraph& G = tilted().G;
    ASSERT_FALSE(G.W.empty());
    for (std::size_t i = 0; i + 1 < G.W.size(); ++i) EXPECT_LE(G.W[i].a + G.W[i].len, G.W[i + 1].a + 1e-12);
    for (const auto& W : G.W) EXPECT_LE(21 * W.len, G.d(W.center()) + 1e-12);
}

TEST(RegimeGraph, TiltedLineIsRecovered) {
    const Regime& R = tilted();
    const RegimeGraph& G = R.G;
    // the frame follows the plane of Q(S), so the line is t = 0 in frame coordinates
    for (const auto& W : G.W)
        if (!W.zero) EXPECT_NEAR(W.fit.m, 0.0, 1e-6);
    for (std::size_t k = 0; k < G.samples.size(); k += 37) {
        Vec2 X = G.gmap(G.samples[k]);
        EXPECT_NEAR(X.y(), 0.1 * X.x(), 1e-6);
    }
}

TEST(Certificate, GraphBoundsOnTiltedLine) {
    const Regime& R = tilted();
    CoronaOptions co;
    co.flat_window = 5;
    GraphCertificate c = certify_graph(R.G, R.T, R.geo, R.cloud, co);
    EXPECT_LE(c.lipschitz, 2 * co.eps0);
    EXPECT_LE(c.support_radius, 4.0);
    EXPECT_LE(c.d_lipschitz, 1 + 1e-9);
    EXPECT_LE(c.partition_error, 1e-12);
    EXPECT_LE(c.cone_ratio_max, 1.0);
    EXPECT_EQ(c.fallbacks, 0);
    EXPECT_FALSE(certificate_json(c).dump().empty());
}

TEST(RegimeGraph, EmptyRegimeIsRejected) {
    const Regime& R = flat();
    CoherentRegime S;
    S.top = R.S.top;
    EXPECT_THROW(build_graph(R.T, S, R.geo, R.cloud), Error);
    EXPECT_THROW(l1_affine_fit({}, {}, {}), Error);
}
