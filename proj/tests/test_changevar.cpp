#include "urg/changevar.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace urg;

namespace {

struct Flat {
    RegimeGraph G;
    SmoothGraph SG;
    FlattenMap M;
    explicit Flat(std::function<double(double)> b, int n = 4097)
        : G(sampled_graph(GraphFrame{}, 1.0, -8, 8, n, std::move(b))), SG(G), M(SG, G.frame, 1.0) {}
};

std::vector<Vec2> certificate_samples() {
    std::vector<Vec2> S;
    for (int i = 0; i <= 40; ++i)
        for (int k = 0; k <= 12; ++k)
            for (int sg : {-1, 1}) S.push_back({-1 + 2.0 * i / 40, sg * std::pow(2.0, -6 + 0.5 * k)});
    return S;
}

} // namespace

TEST(Flatten, ZeroGraphIsIdentity) {
    Flat F([](double) { return 0.0; });
    for (double p : {-0.7, 0.0, 0.4})
        for (double t : {-0.5, 0.01, 1.0}) {
            EXPECT_LT((F.M.rho(p, t) - Vec2(p, t)).norm(), 1e-14);
            Jacobians j = F.M.jac(p, t);
            EXPECT_LT((j.Jac - Mat2::Identity()).norm(), 1e-14);
        }
}

TEST(Flatten, AffineClosedForms) {
    const double m = 0.1, c = 0.2;
    Flat F([&](double p) { return m * p + c; });
    Mat2 J;
    J << 1, m, -m, 1;
    for (double p : {-0.5, 0.3})
        for (double t : {-0.25, 0.5}) {
            Vec2 y = F.M.rho_frame(p, t);
            EXPECT_NEAR(y.x(), p - t * m, 1e-13);
            EXPECT_NEAR(y.y(), t + m * p + c, 1e-13);
            Jacobians j = F.M.jac(p, t);
            EXPECT_LT((j.Jac - J).norm(), 1e-12);
            EXPECT_LT((j.J - J).norm(), 1e-12);
            EXPECT_NEAR(j.Jac.determinant(), 1 + m * m, 1e-12);
        }
}

TEST(Flatten, AffineInverseMatchesLinearSolve) {
    const double m = 0.1, c = 0.2;
    Flat F([&](double p) { return m * p + c; });
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1, 1);
    Mat2 A;
    A << 1, -m, m, 1;  // (p, t) -> (p - t m, t + m p)
    for (int k = 0; k < 100; ++k) {
        Vec2 X(U(rng), U(rng));
        if (std::abs(X.y() - m * X.x() - c) < 1e-3) continue;
        Vec2 exact = A.inverse() * (X - Vec2(0, c));
        EXPECT_LT((F.M.invert(X) - exact).norm(), 1e-12);
    }
}

TEST(Flatten, RoundTripOnKink) {
    Flat F([](double p) { return 0.05 * std::abs(p); }, 16 * 256 + 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    int n = 0;
    while (n < 1000) {
        double p = U(rng), t = U(rng);
        if (std::abs(t) < 1e-3) continue;
        Vec2 X = F.M.rho(p, t);
        Vec2 z = F.M.invert(X);
        EXPECT_LT((F.M.rho(z.x(), z.y()) - X).norm(), 1e-10);
        EXPECT_LT((z - Vec2(p, t)).norm(), 1e-8);
        ++n;
    }
}

TEST(Flatten, WindowUnderflowIsResolutionError) {
    Flat F([](double) { return 0.0; });
    try {
        F.M.jac(7.5, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::resolution_exceeded);
    }
}

TEST(Certificate, KinkBoundsAndScaling) {
    JacobianCertificate c[2];
    int k = 0;
    for (double eps : {0.05, 0.025}) {
        Flat F([&](double p) { return eps * std::abs(p); }, 16 * 256 + 1);
        c[k] = jacobian_certificate(F.M, F.SG, certificate_samples());
        EXPECT_GE(c[k].bilip_lo, 1 - 10 * eps);
        EXPECT_LE(c[k].bilip_hi, 1 + 10 * eps);
        EXPECT_GE(c[k].detjac_min, 0.5);
        EXPECT_LE(c[k].detjac_max, 2.0);
        EXPECT_NEAR(c[k].offset_ratio, eps, 1e-9);
        EXPECT_GT(c[k].distance_lo, 1 - 2 * eps);
        EXPECT_LT(c[k].distance_hi, 1 + 2 * eps);
        for (double r : c[k].ratio) EXPECT_LT(r, 4.0);
        ++k;
    }
    EXPECT_LE(c[1].lhs[1] / c[0].lhs[1], 0.7);
    EXPECT_LE(c[1].lhs[4] / c[0].lhs[4], 0.7);
    EXPECT_NEAR(c[0].ratio[1], c[1].ratio[1], 0.1);
}

TEST(Certificate, JacobianMatchesConvolutionOracle) {
    auto b = [](double p) { return 0.05 * std::abs(p) + 0.02 * std::sin(3 * p); };
    auto db = [](double p) { return 0.05 * (p > 0 ? 1 : -1) + 0.06 * std::cos(3 * p); };
    Flat F(b, 16 * 256 + 1);
    // rho from the exact profile: convolution by adaptive quadrature, split at the kink
    auto conv = [](const std::function<double(double)>& f, double p, double r) {
        auto g = [&](double u) { return eta(u) * f(p - r * u); };
        using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
        double k = p / r;
        if (std::abs(k) >= 1) return GK::integrate(g, -1.0, 1.0, 15, 1e-13);
        return GK::integrate(g, -1.0, k, 15, 1e-13) + GK::integrate(g, k, 1.0, 15, 1e-13);
    };
    auto rho = [&](double p, double t) {
        double r = std::abs(t);
        return Vec2(p - t * conv(db, p, r), t + conv(b, p, r));
    };
    const double h = 1e-4;
    for (double p : {-0.3, 0.0, 0.2})
        for (double t : {-0.2, 0.05, 0.4}) {
            Jacobians j = F.M.jac(p, t);
            EXPECT_LT((F.M.rho_frame(p, t) - rho(p, t)).norm(), 1e-5);
            Vec2 dp = (rho(p + h, t) - rho(p - h, t)) / (2 * h);
            Vec2 dt = (rho(p, t + h) - rho(p, t - h)) / (2 * h);
            // rows of Jac are d/dp and d/dt of rho
            EXPECT_LT((j.Jac.row(0).transpose() - dp).norm(), 1e-4);
            EXPECT_LT((j.Jac.row(1).transpose() - dt).norm(), 1e-4);
        }
}

TEST(Conjugate, IdentityWithZeroGraph) {
    Flat F([](double) { return 0.0; });
    auto I = [](const Vec2&) { return Mat2::Identity(); };
    ConjugatedOperator C = conjugate(F.M, I, I, -1, 1, -0.5, 0.5, 1.0 / 16);
    for (int id = 0; id < C.grid.size(); ++id) {
        EXPECT_LT((C.field.A[id] - Mat2::Identity()).norm(), 1e-13);
        EXPECT_LT(C.field.C[id].norm(), 1e-13);
    }
    EXPECT_LT(C.carleson, 1e-12);
}

TEST(Conjugate, AffineMatchesDenseFormula) {
    const double m = 0.1;
    Flat F([&](double p) { return m * p + 0.2; });
    auto A = [](const Vec2& X) {
        Mat2 D;
        D << 2 + std::sin(X.x()), 0, 0, 1;
        Mat2 R = rotation(0.3 * X.y());
        return Mat2(R * D * R.transpose());
    };
    Mat2 J;
    J << 1, m, -m, 1;
    ConjugatedOperator C = conjugate(F.M, A, nullptr, -1, 1, 0, 1, 1.0 / 8);
    for (int id = 0; id < C.grid.size(); ++id) {
        Vec2 pt = C.grid.node(id);
        if (pt.y() == 0.0) continue;
        Mat2 Ji = J.inverse();
        Mat2 oracle = J.determinant() * Ji.transpose() * A(F.M.rho(pt.x(), pt.y())) * Ji;
        EXPECT_LT((C.field.A[id] - oracle).norm(), 1e-12);
    }
    // conformal: identity coefficients stay the identity
    auto I = [](const Vec2&) { return Mat2::Identity(); };
    ConjugatedOperator CI = conjugate(F.M, I, nullptr, -1, 1, 0, 1, 1.0 / 8);
    for (int id = 0; id < CI.grid.size(); ++id) EXPECT_LT((CI.field.A[id] - Mat2::Identity()).norm(), 1e-12);
}

TEST(Conjugate, ResidualHalvesWithGrid) {
    Flat F([](double p) { return 0.05 * std::abs(p); }, 16 * 256 + 1);
    auto I = [](const Vec2&) { return Mat2::Identity(); };
    auto u = [](const Vec2& X) { return std::exp(X.x()) * std::cos(X.y()); };
    double prev = 0;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        ConjugatedOperator C = conjugate(F.M, I, I, -1, 1, 0, 1, h);
        EXPECT_LE(C.ellipticity, 2 * 1.0 + 1e-9);
        double r = conjugation_residual(F.M, C, u).max_residual;
        if (prev > 0) {
            EXPECT_GT(prev / r, 2 * 0.7);
            EXPECT_LT(prev / r, 2 * 1.3);
        }
        prev = r;
    }
}
