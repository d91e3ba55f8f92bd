#pragma once

// Bi-Lipschitz flattening of a regime graph: rho(p, t) = (p - t d_p b^t, t + b^t) in frame
// coordinates, its Jacobian and surrogate, Newton inversion, certificates and the conjugated
// coefficient field.

#include "urg/pde.hpp"
#include "urg/smoothdist.hpp"

#include <random>

namespace urg {

/// Regime graph given by a profile p -> b(p) sampled on [lo, hi].
inline RegimeGraph sampled_graph(const GraphFrame& frame, double ell_top, double lo, double hi, int n,
                                 const std::function<double(double)>& b) {
    require(n >= 2 && hi > lo, ErrorKind::invalid_input, "bad sample range");
    RegimeGraph G;
    G.frame = frame;
    G.ell_top = ell_top;
    G.p_top = 0.5 * (lo + hi);
    G.spacing = (hi - lo) / (n - 1);
    for (int k = 0; k < n; ++k) {
        double p = lo + (hi - lo) * k / (n - 1);
        G.samples.push_back(p);
        G.b_samples.push_back(b(p));
        G.d_samples.push_back(0.0);
    }
    return G;
}

struct Jacobians {
    Mat2 Jac, J;  // rows: gradient components, so grad(f o rho) = Jac (grad f o rho)
    SmoothGraphValue v;
};

class FlattenMap {
public:
    explicit FlattenMap(const SmoothGraph& SG, const GraphFrame& frame, double ell)
        : SG_(SG), frame_(frame), ell_(ell) {}

    const GraphFrame& frame() const { return frame_; }
    double ell() const { return ell_; }

    /// rho in frame coordinates.
    Vec2 rho_frame(double p, double t) const {
        if (t == 0.0) return {p, SG_.b(p)};
        check_window(p, t);
        SmoothGraphValue v = SG_.eval(p, t);
        return {p - t * v.dp, t + v.bt};
    }
    Vec2 rho(double p, double t) const {
        Vec2 y = rho_frame(p, t);
        return frame_.point(y.x(), y.y());
    }

    Jacobians jac(double p, double t) const {
        require(t != 0.0, ErrorKind::invalid_input, "Jacobian requested on t = 0");
        check_window(p, t);
        Jacobians r;
        r.v = SG_.eval(p, t);
        const auto& v = r.v;
        r.Jac << 1 - t * v.dpp, v.dp, -t * v.dtp - v.dp, 1 + v.dt;
        r.J << 1, v.dp, -v.dp, 1;
        return r;
    }

    /// (p, t) with rho(p, t) = X, to 1e-10 l (iterates further while the residual decreases).
    Vec2 invert(const Vec2& X) const {
        Vec2 y(frame_.pi(X), frame_.pi_perp(X));
        Vec2 z(y.x(), y.y() - SG_.b(y.x()));
        auto resid = [&](const Vec2& w) { return (rho_frame(w.x(), w.y()) - y).eval(); };
        Vec2 F = resid(z);
        double best = F.norm();
        const double tol = 1e-10 * ell_;
        for (int it = 0; it < 50; ++it) {
            if (best <= 1e-4 * tol) return z;
            double t = z.y();
            if (t == 0.0) t = (y.y() >= SG_.b(y.x()) ? 1 : -1) * 1e-3 * ell_;
            Mat2 D = jac(z.x(), t).Jac.transpose();
            Vec2 step = D.colPivHouseholderQr().solve(-F);
            double lam = 1.0;
            Vec2 zn = z + step;
            Vec2 Fn = resid(zn);
            while (Fn.norm() >= best && lam > 1e-6) {
                lam *= 0.5;
                zn = z + lam * step;
                Fn = resid(zn);
            }
            if (Fn.norm() >= best) break;
            z = zn, F = Fn, best = Fn.norm();
        }
        if (best <= tol) return z;
        std::ostringstream msg;
        msg << "Newton inversion did not converge; best residual " << best;
        fail(ErrorKind::numeric_failure, msg.str());
    }

private:
    const SmoothGraph& SG_;
    GraphFrame frame_;
    double ell_;

    void check_window(double p, double t) const {
        double r = std::abs(t);
        if (p - r < SG_.window_lo() || p + r > SG_.window_hi())
            fail(ErrorKind::resolution_exceeded, "smoothing window leaves the sampled graph");
    }
};

// ---------------------------------------------------------------- certificates

struct JacobianCertificate {
    double ratio[6] = {0, 0, 0, 0, 0, 0};  // sup of lhs / (rhs + 1e-12) per item
    double lhs[6] = {0, 0, 0, 0, 0, 0};    // sup of lhs per item
    double bilip_lo = kInf, bilip_hi = 0.0;
    double detjac_min = kInf, detjac_max = 0.0;
    double jac_minus_identity = 0.0;  // sup ||Jac - I||
    double distance_lo = kInf, distance_hi = 0.0;  // dist(rho(p,t), graph) / |t|
    double offset_ratio = 0.0;                     // sup |rho - b(p) - (0,t)| / |t|
    int samples = 0;
};

/// Evaluates the six Jacobian comparisons, determinant bounds and distance preservation on
/// the given samples, and bi-Lipschitz ratios on random pairs drawn from them.
inline JacobianCertificate jacobian_certificate(const FlattenMap& M, const SmoothGraph& SG,
                                                const std::vector<Vec2>& samples, int pairs = 2000,
                                                std::uint64_t seed = 1) {
    JacobianCertificate c;
    auto upd = [&](int k, double l, double r) {
        c.lhs[k] = std::max(c.lhs[k], l);
        c.ratio[k] = std::max(c.ratio[k], l / (r + 1e-12));
    };
    for (const Vec2& s : samples) {
        double p = s.x(), t = s.y();
        if (t == 0.0) continue;
        Jacobians j = M.jac(p, t);
        const auto& v = j.v;
        double gp = std::abs(v.dp);
        double hess = std::hypot(v.dpp, v.dtp);
        double rhs2 = std::abs(v.dt) + std::abs(t) * hess;
        Mat2 I = Mat2::Identity();
        double dJac = j.Jac.determinant(), dJ = j.J.determinant();
        upd(0, (j.J - I).norm(), gp);
        upd(1, (j.Jac - j.J).norm(), rhs2);
        upd(2, std::abs(dJ - 1), gp);
        upd(3, std::abs(dJac - dJ), rhs2);
        upd(4, (j.Jac.inverse() - j.J.inverse()).norm(), rhs2);
        // d/d(b_p) of det J and J^{-1}
        double q = 1 + v.dp * v.dp;
        Mat2 Jinv = j.J.inverse(), dN;
        dN << 0, -1, 1, 0;
        Mat2 dJinv = dN / q - Jinv * (2 * v.dp / q);
        upd(5, (2 * gp + dJinv.norm()) * hess, hess);
        c.detjac_min = std::min(c.detjac_min, dJac);
        c.detjac_max = std::max(c.detjac_max, dJac);
        c.jac_minus_identity = std::max(c.jac_minus_identity, (j.Jac - I).norm());
        Vec2 y = M.rho_frame(p, t);
        Vec2 base(p, SG.b(p));
        c.offset_ratio = std::max(c.offset_ratio, (y - base - Vec2(0, t)).norm() / std::abs(t));
        // distance to the graph by a local search over samples of b
        double d = kInf;
        const double h = SG.spacing();
        double lo = y.x() - 3 * std::abs(t), hi = y.x() + 3 * std::abs(t);
        int n = std::max(64, static_cast<int>(std::ceil((hi - lo) / (h / 4))));
        n = std::min(n, 20000);
        for (int k = 0; k <= n; ++k) {
            double q2 = lo + (hi - lo) * k / n;
            d = std::min(d, (y - Vec2(q2, SG.b(q2))).norm());
        }
        c.distance_lo = std::min(c.distance_lo, d / std::abs(t));
        c.distance_hi = std::max(c.distance_hi, d / std::abs(t));
        ++c.samples;
    }
    if (samples.size() >= 2) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
        for (int k = 0; k < pairs; ++k) {
            std::size_t a = pick(rng), b = pick(rng);
            if (a == b) continue;
            double du = (samples[a] - samples[b]).norm();
            if (du == 0) continue;
            double dr = (M.rho_frame(samples[a].x(), samples[a].y()) - M.rho_frame(samples[b].x(), samples[b].y())).norm();
            c.bilip_lo = std::min(c.bilip_lo, dr / du);
            c.bilip_hi = std::max(c.bilip_hi, dr / du);
        }
    }
    return c;
}

inline nlohmann::json certificate_json(const JacobianCertificate& c) {
    nlohmann::json r = nlohmann::json::array(), l = nlohmann::json::array();
    for (int k = 0; k < 6; ++k) r.push_back(c.ratio[k]), l.push_back(c.lhs[k]);
    return {{"bilip_lo", c.bilip_lo},
            {"bilip_hi", c.bilip_hi},
            {"detJac_min", c.detjac_min},
            {"detJac_max", c.detjac_max},
            {"jacobian_ratios", r},
            {"jacobian_lhs", l},
            {"distance_ratio", {c.distance_lo, c.distance_hi}},
            {"offset_ratio", c.offset_ratio},
            {"samples", c.samples}};
}

// ---------------------------------------------------------------- conjugation

using CoefficientFn = std::function<Mat2(const Vec2&)>;

/// Physical coefficients expressed in frame axes.
inline Mat2 to_frame(const GraphFrame& F, const Mat2& A) {
    Mat2 R;
    R.col(0) = F.e;
    R.col(1) = F.n;
    return R.transpose() * A * R;
}

/// Bilinear interpolation of a node coefficient field.
inline Mat2 field_at(const std::vector<Mat2>& f, const DomainGrid& G, const Vec2& X) {
    double fx = (X.x() - G.x0) / G.h, fy = (X.y() - G.y0) / G.h;
    int i = std::clamp(static_cast<int>(std::floor(fx)), 0, G.nx - 2);
    int j = std::clamp(static_cast<int>(std::floor(fy)), 0, G.ny - 2);
    double a = std::clamp(fx - i, 0.0, 1.0), b = std::clamp(fy - j, 0.0, 1.0);
    return (1 - a) * (1 - b) * f[G.id(i, j)] + a * (1 - b) * f[G.id(i + 1, j)] + (1 - a) * b * f[G.id(i, j + 1)] +
           a * b * f[G.id(i + 1, j + 1)];
}

struct ConjugatedOperator {
    DomainGrid grid;  // (p, t) grid, frame coordinates
    OperatorField field;
    double ellipticity = 0.0;      // max over nodes
    double carleson = 0.0;         // windowed Carleson norm of |t grad B_S| + |C_S|
    double t_grad_B_max = 0.0;
};

/// A_S = det(Jac) Jac^{-T} (A o rho) Jac^{-1}, B_S = det(J) J^{-T} (B o rho) J^{-1}, C_S = A_S - B_S
/// on a (p, t) grid; nodes with t = 0 are skipped (identity).
inline ConjugatedOperator conjugate(const FlattenMap& M, const CoefficientFn& A, const CoefficientFn& B, double p_lo,
                                    double p_hi, double t_lo, double t_hi, double h, double CA = 0.0) {
    ConjugatedOperator C;
    DomainGrid& G = C.grid;
    G.x0 = p_lo, G.y0 = t_lo, G.h = h;
    G.nx = static_cast<int>(std::floor((p_hi - p_lo) / h + 1e-9)) + 1;
    G.ny = static_cast<int>(std::floor((t_hi - t_lo) / h + 1e-9)) + 1;
    G.inside.assign(G.size(), 1);
    G.delta.assign(G.size(), 0.0);
    G.nearest.assign(G.size(), -1);
    C.field.A.assign(G.size(), Mat2::Identity());
    C.field.B.assign(G.size(), Mat2::Identity());
    C.field.C.assign(G.size(), Mat2::Zero());
    C.field.has_split = static_cast<bool>(B);
    double ca_in = CA;
    for (int id = 0; id < G.size(); ++id) {
        Vec2 pt = G.node(id);
        G.delta[id] = std::abs(pt.y());
        if (pt.y() == 0.0) continue;
        Jacobians j = M.jac(pt.x(), pt.y());
        Vec2 X = M.rho(pt.x(), pt.y());
        Mat2 Af = to_frame(M.frame(), A(X));
        if (CA <= 0) ca_in = std::max(ca_in, ellipticity(Af));
        Mat2 Ji = j.Jac.inverse();
        Mat2 AS = j.Jac.determinant() * Ji.transpose() * Af * Ji;
        C.field.A[id] = AS;
        if (B) {
            Mat2 Bf = to_frame(M.frame(), B(X));
            Mat2 Jsi = j.J.inverse();
            C.field.B[id] = j.J.determinant() * Jsi.transpose() * Bf * Jsi;
            C.field.C[id] = AS - C.field.B[id];
        }
        C.ellipticity = std::max(C.ellipticity, ellipticity(AS));
    }
    require(C.ellipticity <= 2 * ca_in + 1e-9, ErrorKind::invariant_violation,
            "conjugated coefficients exceed twice the ellipticity constant");
    if (B) {
        std::vector<double> f(G.size(), 0.0);
        for (int j = 1; j + 1 < G.ny; ++j)
            for (int i = 1; i + 1 < G.nx; ++i) {
                int id = G.id(i, j);
                double t = G.node(id).y();
                if (t == 0.0) continue;
                Mat2 gx = (C.field.B[G.id(i + 1, j)] - C.field.B[G.id(i - 1, j)]) / (2 * h);
                Mat2 gy = (C.field.B[G.id(i, j + 1)] - C.field.B[G.id(i, j - 1)]) / (2 * h);
                double tg = std::abs(t) * std::sqrt(gx.squaredNorm() + gy.squaredNorm());
                C.t_grad_B_max = std::max(C.t_grad_B_max, tg);
                f[id] = tg + C.field.C[id].norm();
            }
        std::vector<Ball> balls;
        double span = std::min(p_hi - p_lo, std::max(std::abs(t_lo), std::abs(t_hi)));
        for (double r = span / 2; r >= 8 * h; r /= 2)
            for (double p = p_lo + r / 2; p <= p_hi - r / 2 + 1e-12; p += r / 4) balls.push_back({Vec2(p, 0.0), r});
        C.carleson = cm_norm(f, G, balls);
    }
    return C;
}

struct ResidualReport {
    double max_residual = 0.0;  // max |(L_S,h u o rho)_i| / ||u||_inf over nodes with |t| >= 2h
    int nodes = 0;
};

/// Weak-form residual of u o rho against the hat functions of the (p, t) grid.
inline ResidualReport conjugation_residual(const FlattenMap& M, const ConjugatedOperator& C,
                                           const std::function<double(const Vec2&)>& u) {
    const DomainGrid& G = C.grid;
    std::vector<double> v(G.size()), y(G.size());
    double umax = 0;
    for (int id = 0; id < G.size(); ++id) {
        Vec2 pt = G.node(id);
        v[id] = u(M.rho(pt.x(), pt.y()));
        umax = std::max(umax, std::abs(v[id]));
    }
    GridOperator A(C.field, G);
    A.apply(v, y);
    ResidualReport R;
    for (int id : A.unknowns()) {
        if (std::abs(G.node(id).y()) < 2 * G.h - 1e-12) continue;
        R.max_residual = std::max(R.max_residual, std::abs(y[id]) / std::max(umax, 1e-300));
        ++R.nodes;
    }
    return R;
}

} // namespace urg
