#include "urg/pde.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace urg;

namespace {

DomainGrid square_grid(double h) {
    static std::map<double, BoundaryCloud> clouds;
    auto it = clouds.try_emplace(h, make_line_cloud(4, h, false)).first;
    return make_grid(it->second, [](const Vec2&) { return true; }, Vec2(-1, -1), Vec2(1, 1), h);
}

double max_error(const DomainGrid& G, const std::vector<double>& u, const std::function<double(const Vec2&)>& ex) {
    double e = 0;
    for (int id = 0; id < G.size(); ++id) e = std::max(e, std::abs(u[id] - ex(G.node(id))));
    return e;
}

struct HalfPlane {
    BoundaryCloud cloud;
    DomainGrid G;
    HalfPlane(double L, double h, bool reflect)
        : cloud(make_line_cloud(L + 8, h, false)),
          G(make_grid(cloud, [](const Vec2& X) { return X.y() > 0; }, Vec2(-L, 0), Vec2(L, L), h)) {
        if (reflect) G.reflect[0] = G.reflect[1] = G.reflect[3] = true;
    }
    // share of the boundary cell of a t = 0 node inside [a, b]
    std::function<double(int)> segment(double a, double b) const {
        return [this, a, b](int id) {
            Vec2 X = G.node(id);
            if (std::abs(X.y()) > 1e-12) return 0.0;
            double lo = X.x() - G.h / 2, hi = X.x() + G.h / 2;
            return std::max(0.0, std::min(hi, b) - std::max(lo, a)) / G.h;
        };
    }
};

} // namespace

TEST(Solver, QuadraticHarmonicIsReproduced) {
    for (double h : {1.0 / 8, 1.0 / 32}) {
        DomainGrid G = square_grid(h);
        auto ex = [](const Vec2& X) { return X.x() * X.x() - X.y() * X.y(); };
        SolutionField S = solve(identity_operator(G), G, [&](int id) { return ex(G.node(id)); });
        EXPECT_LT(max_error(G, S.u, ex), h * h);
    }
}

TEST(Solver, SecondOrderConvergence) {
    auto ex = [](const Vec2& X) { return std::exp(X.x()) * std::cos(X.y()); };
    double prev = 0;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        DomainGrid G = square_grid(h);
        SolutionField S = solve(identity_operator(G), G, [&](int id) { return ex(G.node(id)); });
        double e = max_error(G, S.u, ex);
        if (prev > 0) {
            EXPECT_GT(prev / e, 4 * 0.7);
            EXPECT_LT(prev / e, 4 * 1.3);
        }
        prev = e;
    }
}

TEST(Solver, ConstantAnisotropicQuadratics) {
    DomainGrid G = square_grid(1.0 / 32);
    OperatorField op;
    Mat2 M;
    M << 2, 0.5, 0.5, 1;
    op.A.assign(G.size(), M);
    // A : Hess u = 0
    for (auto ex : std::vector<std::function<double(const Vec2&)>>{
             [](const Vec2& X) { return X.x() * X.x() - 2 * X.y() * X.y(); },
             [](const Vec2& X) { return X.x() * X.y() - 0.25 * X.x() * X.x(); }}) {
        SolutionField S = solve(op, G, [&](int id) { return ex(G.node(id)); });
        EXPECT_LT(max_error(G, S.u, ex), 1e-8);
    }
}

TEST(Solver, LinearProfileOnReflectingSlab) {
    HalfPlane P(2, 1.0 / 16, true);
    P.G.reflect[3] = false;
    SolutionField S = solve(identity_operator(P.G), P.G, [&](int id) { return P.G.node(id).y() > 0 ? 1.0 : 0.0; });
    for (int id = 0; id < P.G.size(); ++id) EXPECT_NEAR(S.u[id], P.G.node(id).y() / 2, 1e-9);
}

TEST(Solver, MaximumPrinciple) {
    DomainGrid G = square_grid(1.0 / 32);
    OperatorField op = rotation_operator(G, 2.0, 4.0);
    GridOperator A(op, G);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-1, 3);
    std::vector<double> g(G.size());
    for (double& v : g) v = U(rng);
    SolutionField S = solve(A, [&](int id) { return g[id]; });
    EXPECT_TRUE(maximum_principle(A, S));
}

TEST(Solver, StagnationIsReported) {
    DomainGrid G = square_grid(1.0 / 32);
    SolveOptions o;
    o.tol = 1e-14;
    o.max_iter = 1;
    try {
        solve(identity_operator(G), G, [&](int id) { return G.node(id).x() * G.node(id).y() * G.node(id).y(); }, {}, o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric_failure);
    }
}

TEST(Solver, GreenFunctionIsPositiveAndSymmetric) {
    DomainGrid G = square_grid(1.0 / 32);
    OperatorField op = identity_operator(G);
    int a = G.id(20, 30), b = G.id(45, 12);
    SolutionField Ga = green_finite(op, G, a), Gb = green_finite(op, G, b);
    EXPECT_NEAR(Ga.u[b], Gb.u[a], 1e-8 * Ga.u[b]);
    for (int id = 0; id < G.size(); ++id)
        if (G.col(id) > 0 && G.row(id) > 0 && G.col(id) < G.nx - 1 && G.row(id) < G.ny - 1) EXPECT_GT(Ga.u[id], 0);
}

TEST(Operators, Builders) {
    DomainGrid G = square_grid(1.0 / 16);
    OperatorField R = rotation_operator(G, 1.5, 3.0);
    EXPECT_NEAR(ellipticity(R, G), 3.0, 1e-12);
    EXPECT_NEAR(ellipticity(Mat2::Identity()), 1.0, 1e-15);
    Mat2 skew;
    skew << 1, 1, -1, 1;
    EXPECT_NEAR(ellipticity(skew), std::sqrt(2.0), 1e-12);

    OperatorField M = mollify_operator(identity_operator(G), G);
    for (int id = 0; id < G.size(); ++id) {
        EXPECT_LT((M.B[id] - Mat2::Identity()).norm(), 1e-14);
        EXPECT_LT(M.C[id].norm(), 1e-14);
    }

    BoundaryCloud c = make_line_cloud(4, 1.0 / 64, false);
    DomainGrid H = make_grid(c, [](const Vec2& X) { return X.y() > 0; }, Vec2(-1, 0), Vec2(1, 1), 1.0 / 64);
    OperatorField S = sparse_perturbation(H, 0.5);
    int touched = 0;
    for (int id = 0; id < H.size(); ++id) {
        EXPECT_LT((S.A[id] - S.B[id] - S.C[id]).norm(), 1e-15);
        if (S.C[id].norm() > 0) {
            ++touched;
            double j = -std::log2(H.delta[id]);
            EXPECT_GE(j, 1.0 - 1e-12);
        }
    }
    EXPECT_GT(touched, 0);
    EXPECT_THROW(sparse_perturbation(H, 1.0), Error);
}

TEST(Carleson, ZeroFieldAndBandArea) {
    BoundaryCloud c = make_line_cloud(4, 1.0 / 32, false);
    DomainGrid G = make_grid(c, [](const Vec2& X) { return X.y() > 0; }, Vec2(-1, 0), Vec2(1, 1), 1.0 / 32);
    auto balls = boundary_balls(c, [](const Vec2& p) { return std::abs(p.x()) <= 0.5; }, 1.0 / 8, 0.5);
    EXPECT_FALSE(balls.empty());
    EXPECT_EQ(cm_norm(std::vector<double>(G.size(), 0.0), G, balls), 0.0);
    // f = delta^{1/2} on the band: r^{-1} times the band area inside the ball
    std::vector<double> f(G.size(), 0.0);
    for (int id = 0; id < G.size(); ++id) f[id] = std::sqrt(G.delta[id]);
    double v = cm_norm(f, G, {Ball{Vec2(0, 0), 0.5}});
    EXPECT_NEAR(v, kPi * 0.25 / 2 / 0.5, 0.05);
}

TEST(HarmonicMeasure, HalfLineSeesOneHalf) {
    HalfPlane P(32, 1.0 / 8, true);
    GridOperator A(identity_operator(P.G), P.G);
    EXPECT_NEAR(harmonic_measure(A, P.segment(-1e9, 0), Vec2(0, 1)), 0.5, 1e-3);
}

TEST(HarmonicMeasure, SegmentsMatchPoissonKernel) {
    HalfPlane P(32, 1.0 / 8, false);
    GridOperator A(identity_operator(P.G), P.G);
    auto exact = [](double a, double b, Vec2 X) {
        return (std::atan((b - X.x()) / X.y()) - std::atan((a - X.x()) / X.y())) / kPi;
    };
    Vec2 X(0.7, 0.6);
    double w1 = harmonic_measure(A, P.segment(0.3, 2.5), X);
    EXPECT_NEAR(w1, exact(0.3, 2.5, X), 1e-3);
    double w2 = harmonic_measure(A, P.segment(-1, 1), Vec2(0, 1));
    EXPECT_NEAR(w2, 0.5, 1e-3);
    // additivity over a split of the segment
    double wa = harmonic_measure(A, P.segment(0.3, 1.25), X), wb = harmonic_measure(A, P.segment(1.25, 2.5), X);
    EXPECT_NEAR(wa + wb, w1, 1e-9);
}

TEST(Comb, TruncationLevelsAgree) {
    CombGreen g2 = green_infinity_comb(2, 1.0 / 64, 8.0), g3 = green_infinity_comb(3, 1.0 / 64, 8.0);
    EXPECT_TRUE(g2.positive);
    EXPECT_TRUE(g3.positive);
    for (Vec2 X : {Vec2(0.5, 1), Vec2(0, 2), Vec2(1, -1), Vec2(0.5, -0.25)}) {
        double a = interpolate(g2.grid, g2.field.u, X), b = interpolate(g3.grid, g3.field.u, X);
        EXPECT_NEAR(a, b, 0.05 * b) << X.transpose();
    }
    EXPECT_THROW(green_infinity_comb(2, 1.0 / 32), Error);
}
