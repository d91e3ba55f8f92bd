#include "urg/changevar.hpp"
#include "urg/smoothdist.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace urg;

namespace {

const BoundaryCloud& line() {
    static const BoundaryCloud c = make_line_cloud(4, 1.0 / 256, true);
    return c;
}

const BoundaryCloud& sawtooth() {
    static const BoundaryCloud c = make_sawtooth_cloud(0.05, 0.25, 4, 1.0 / 512, true);
    return c;
}

double eta_moment_abs() {
    return 2 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                   [](double u) { return u * eta(u); }, 0.0, 1.0, 15, 1e-14);
}

} // namespace

TEST(CBeta, OneIsPi) { EXPECT_NEAR(c_beta(1), kPi, 1e-12); }

TEST(CBeta, Recursion) {
    for (double b : {0.5, 1.0, 2.0, 4.0}) EXPECT_NEAR((b + 1) * c_beta(b + 2), b * c_beta(b), 1e-8);
}

TEST(CBeta, MatchesBetaFunctionAndDecreases) {
    double prev = kInf;
    for (double b : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        double c = c_beta(b);
        EXPECT_NEAR(c, boost::math::beta(b / 2, 0.5), 1e-10);
        EXPECT_LT(c, prev);
        prev = c;
    }
    EXPECT_NEAR(c_beta(1, 2), 2 * kPi, 1e-10);
    EXPECT_THROW(c_beta(0), Error);
}

TEST(RayKernel, MatchesQuadratureAndFiniteDifferences) {
    Ray ray{Vec2(1, 0.2), Vec2(0.6, 0.8), 1.0};
    Vec2 X(0.3, 0.9);
    boost::math::quadrature::exp_sinh<double> q;
    for (double beta : {0.5, 1.0, 2.0}) {
        auto [I, g] = ray_kernel(ray, X, beta);
        double J = q.integrate([&](double s) { return std::pow((X - ray.origin - s * ray.dir).norm(), -1 - beta); },
                               0.0, std::numeric_limits<double>::infinity());
        EXPECT_NEAR(I, J, 1e-10 * J);
        const double h = 1e-5;
        auto f = [&](Vec2 Y) { return ray_kernel(ray, Y, beta).first; };
        Vec2 fd((f(X + Vec2(h, 0)) - f(X - Vec2(h, 0))) / (2 * h), (f(X + Vec2(0, h)) - f(X - Vec2(0, h))) / (2 * h));
        EXPECT_LT((fd - g).norm(), 1e-6 * g.norm());
    }
}

TEST(DBeta, HalfPlane) {
    DBetaEvaluator E(line(), 1.0);
    for (double t : {1.0 / 64, 0.1, 0.5, 1.0}) {
        DBetaValue v = E.eval(Vec2(0.013, t));
        EXPECT_NEAR(v.D, t / kPi, 1e-4 * t / kPi);
    }
    DBetaValue v = E.eval(Vec2(0, 1.0 / 64));
    EXPECT_NEAR(v.grad.x(), 0.0, 1e-4);
    EXPECT_NEAR(v.grad.y(), 1 / kPi, 1e-4);
    for (double beta : {0.5, 2.0}) {
        DBetaEvaluator Eb(line(), beta);
        double t = 0.25;
        EXPECT_NEAR(Eb.eval(Vec2(0.1, t)).D, std::pow(c_beta(beta), -1 / beta) * t, 1e-4 * t);
    }
}

TEST(DBeta, GradientMatchesFiniteDifferences) {
    DBetaEvaluator E(sawtooth(), 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> P(-0.9, 0.9), T(0.08, 0.6);
    for (int k = 0; k < 100; ++k) {
        Vec2 X(P(rng), T(rng));
        const double h = 1e-6;
        auto D = [&](Vec2 Y) { return E.eval(Y).D; };
        Vec2 fd((D(X + Vec2(h, 0)) - D(X - Vec2(h, 0))) / (2 * h), (D(X + Vec2(0, h)) - D(X - Vec2(0, h))) / (2 * h));
        Vec2 g = E.eval(X).grad;
        EXPECT_LT((fd - g).norm(), 1e-4 * g.norm()) << X.transpose();
    }
}

TEST(DBeta, ComparableToDistance) {
    DBetaEvaluator E(sawtooth(), 1.0);
    double lo = kInf, hi = 0;
    for (int i = 0; i <= 40; ++i)
        for (double t : {0.02, 0.05, 0.1, 0.3, 0.6}) {
            Vec2 X(-1 + 2.0 * i / 40, 0.05 + t);
            double r = E.eval(X).D / sawtooth().distance(X).second;
            lo = std::min(lo, r), hi = std::max(hi, r);
        }
    EXPECT_GT(lo, 0.1);
    EXPECT_LT(hi / lo, 4.0);
}

TEST(DBeta, TooCloseIsResolutionError) {
    DBetaEvaluator E(line(), 1.0);
    try {
        E.eval(Vec2(0.0, 1.0 / 256));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::resolution_exceeded);
    }
    EXPECT_NO_THROW(E.eval(Vec2(0.0, 3.0 / 256)));
}

TEST(DBeta, FieldOnGrid) {
    DomainGrid G = make_grid(line(), [](const Vec2& X) { return X.y() > 0; }, Vec2(-0.5, 0), Vec2(0.5, 0.5), 1.0 / 32);
    DBetaEvaluator E(line(), 1.0);
    DBetaField F = dbeta_field(E, G);
    EXPECT_NEAR(F.c_beta, kPi, 1e-12);
    auto [lo, hi] = equivalence_range(F, G);
    EXPECT_NEAR(lo, 1 / kPi, 1e-4);
    EXPECT_NEAR(hi, 1 / kPi, 1e-4);
}

TEST(SmoothGraph, AffineIsReproduced) {
    RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -8, 8, 4097, [](double p) { return 0.1 * p + 0.2; });
    SmoothGraph SG(G);
    for (double p : {-1.0, 0.0, 0.37})
        for (double t : {-2.0, -0.01, 0.01, 0.5, 2.0}) {
            SmoothGraphValue v = SG.eval(p, t);
            EXPECT_NEAR(v.bt, 0.1 * p + 0.2, 1e-12);
            EXPECT_NEAR(v.dp, 0.1, 1e-12);
            EXPECT_NEAR(v.dt, 0.0, 1e-12);
            EXPECT_NEAR(v.dpp, 0.0, 1e-10);
            EXPECT_NEAR(v.dtp, 0.0, 1e-10);
        }
}

TEST(SmoothGraph, QuadraticCurvature) {
    RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -4, 4, 8193, [](double p) { return p * p; });
    SmoothGraph SG(G);
    for (double t : {0.05, 0.5}) EXPECT_NEAR(SG.eval(0.3, t).dpp, 2.0, 1e-3);
}

TEST(SmoothGraph, KinkAgainstConvolutionOracle) {
    const double eps = 0.05;
    RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -8, 8, 16 * 256 + 1, [&](double p) { return eps * std::abs(p); });
    SmoothGraph SG(G);
    const double m1 = eta_moment_abs();
    for (double t : {0.05, 0.25, 1.0}) {
        SmoothGraphValue v = SG.eval(0.0, t);
        EXPECT_NEAR(v.bt, eps * t * m1, 1e-3 * eps * t);
        EXPECT_NEAR(v.dt, eps * m1, 1e-3 * eps);
        EXPECT_LE(std::abs(v.bt), 2 * eps * t);
        // away from the kink the graph is locally affine
        EXPECT_NEAR(SG.eval(0.5, t / 8).dt, 0.0, 1e-9);
    }
}

TEST(SmoothGraph, CarlesonRatioScalesWithSlope) {
    double r[2];
    int k = 0;
    for (double eps : {0.05, 0.025}) {
        RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -8, 8, 16 * 256 + 1, [&](double p) { return eps * std::abs(p); });
        SmoothGraph SG(G);
        r[k++] = graph_carleson_ratio(SG, 0.0, 1.0, 1.0 / 64, eps);
    }
    EXPECT_GT(r[0], 0.0);
    EXPECT_LT(r[0], 10.0);
    EXPECT_NEAR(r[0], r[1], 0.05 * r[0]);
}

TEST(ApproxPlane, FlatLineHasUnitDensity) {
    RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -3, 3, 1537, [](double) { return 0.0; });
    SmoothGraph SG(G);
    for (double p : {-0.5, 0.0, 0.3})
        for (double t : {1.0 / 16, 0.25, 1.0}) {
            ApproxPlane L = approx_plane(G, SG, line(), p, t);
            EXPECT_NEAR(L.lambda, 1.0, 1e-6);
            EXPECT_NEAR(L.normal.y(), 1.0, 1e-12);
        }
}

TEST(PlaneCompare, FlatResidualsVanish) {
    const BoundaryCloud& c = line();
    DyadicTree T = build_dyadic(c, top_generation(8.0), 4);
    RegimeGraph G = sampled_graph(GraphFrame{}, 1.0, -3, 3, 1537, [](double) { return 0.0; });
    SmoothGraph SG(G);
    DBetaEvaluator E(c, 1.0);
    int q = T.cube_of(c.distance(Vec2(0.1, 0)).first, 2);
    const double l = T[q].ell();
    Vec2 X = T[q].xq + Vec2(0, 0.75 * l);
    PlaneResiduals R = plane_compare(T, q, X, T[q].xq.x(), l, G, SG, c, E, 0.0);
    EXPECT_NEAR(R.lambda, 1.0, 1e-6);
    EXPECT_LT(R.value, 1e-4 * E.eval(X).S);
    EXPECT_LT(R.gradient * l, 1e-4);
    EXPECT_THROW(plane_compare(T, q, X, T[q].xq.x(), 64 * l, G, SG, c, E, 0.0), Error);
    EXPECT_THROW(plane_compare(T, q, X + Vec2(0, 2 * l), T[q].xq.x(), l, G, SG, c, E, 0.0), Error);
}
