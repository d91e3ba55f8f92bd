#pragma once

// Regularized distance D_beta and its gradient, the mollified regime graph,
// the approximating lines Lambda(p,t) with their densities, and the
// comparison residuals between D_beta and the distance to those lines.

#include "urg/graph.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace urg {

/// integral over R^d of (1 + |p|^2)^{-(d + beta)/2}, by double-exponential quadrature.
inline double c_beta(double beta, int d = 1) {
    require(beta > 0, ErrorKind::invalid_input, "beta must be positive");
    require(d >= 1, ErrorKind::invalid_input, "dimension must be positive");
    boost::math::quadrature::exp_sinh<double> q;
    double radial = q.integrate(
        [&](double r) { return std::pow(r, d - 1) * std::pow(1 + r * r, -(d + beta) / 2); }, 0.0,
        std::numeric_limits<double>::infinity(), 1e-14);
    double sphere = 2 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);  // |S^{d-1}|
    return sphere * radial;
}

/// F_beta(z) = integral from z to infinity of (1 + s^2)^{-(1 + beta)/2}.
inline double ray_tail(double beta, double z) {
    double half = 0.5 * boost::math::beta(beta / 2, 0.5);
    double v = half * boost::math::ibeta(beta / 2, 0.5, 1 / (1 + z * z));
    return z >= 0 ? v : 2 * half - v;
}

/// Kernel integral of |X - y|^{-1-beta} along a ray of unit density, with its gradient in X.
inline std::pair<double, Vec2> ray_kernel(const Ray& ray, const Vec2& X, double beta) {
    Vec2 u = ray.dir.normalized(), v = perp(u);
    Vec2 r = X - ray.origin;
    double a = r.dot(u), b = r.dot(v);
    if (b == 0.0) {
        require(a < 0, ErrorKind::invalid_input, "point lies on a boundary ray");
        double I = std::pow(-a, -beta) / beta;
        return {I, std::pow(-a, -1 - beta) * u};
    }
    double ab = std::abs(b), z = -a / ab;
    double I = std::pow(ab, -beta) * ray_tail(beta, z);
    double dIa = std::pow(a * a + b * b, -(1 + beta) / 2);
    double dIb = -(1 + beta) * b * std::pow(ab, -beta - 2) * ray_tail(beta + 2, z);
    return {I, dIa * u + dIb * v};
}

/// 2-point Gauss nodes on the edges of diamonds centred at (2k, 0), |k| in [from, to].
inline WeightedPoints comb_far_field(int from, int to) {
    WeightedPoints out;
    const double g = 0.5 / std::sqrt(3.0);
    double side = std::sqrt(0.5);
    for (int s : {-1, 1})
        for (int k = from; k <= to; ++k) {
            double cx = 2.0 * s * k;
            const Vec2 v[4] = {{cx + 0.5, 0.0}, {cx, 0.5}, {cx - 0.5, 0.0}, {cx, -0.5}};
            for (int e = 0; e < 4; ++e) {
                Vec2 A = v[e], B = v[(e + 1) % 4];
                out.add(A + (B - A) * (0.5 - g), side / 2);
                out.add(A + (B - A) * (0.5 + g), side / 2);
            }
        }
    return out;
}

struct DBetaValue {
    double D = 0.0;
    Vec2 grad = Vec2::Zero();  // gradient of D
    double S = 0.0;            // D^{-beta}
    Vec2 gradS = Vec2::Zero();
};

/// D_beta^{-beta}(X) = integral of |X - y|^{-1-beta} d sigma(y): point masses for the cloud and
/// any extra far-field nodes, closed forms for the rays.
class DBetaEvaluator {
public:
    DBetaEvaluator(const BoundaryCloud& cloud, double beta, WeightedPoints far = {})
        : cloud_(cloud), beta_(beta), far_(std::move(far)) {
        require(beta > 0, ErrorKind::invalid_input, "beta must be positive");
        cloud.validate();
        spacing_ = cloud.mean_spacing();
    }

    double beta() const { return beta_; }
    double spacing() const { return spacing_; }
    double min_delta() const { return 2 * spacing_; }

    /// Throws resolution-exceeded when delta(X) <= 2 * spacing.
    DBetaValue eval(const Vec2& X) const {
        double d = cloud_.distance(X).second;
        if (!(d > min_delta()))
            fail(ErrorKind::resolution_exceeded,
                 "distance to the boundary below the quadrature limit " + std::to_string(min_delta()));
        return eval_unchecked(X);
    }

    DBetaValue eval_unchecked(const Vec2& X) const {
        double S = 0;
        Vec2 gS = Vec2::Zero();
        auto add = [&](const std::vector<Vec2>& ys, const std::vector<double>& ws) {
            const std::size_t n = ys.size();
            if (beta_ == 1.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    Vec2 r = X - ys[i];
                    double k = 1 / r.squaredNorm();
                    S += ws[i] * k;
                    gS -= (2 * ws[i] * k * k) * r;
                }
                return;
            }
            for (std::size_t i = 0; i < n; ++i) {
                Vec2 r = X - ys[i];
                double r2 = r.squaredNorm();
                double k = std::pow(r2, -(1 + beta_) / 2);
                S += ws[i] * k;
                gS -= (ws[i] * (1 + beta_) * k / r2) * r;
            }
        };
        add(cloud_.points, cloud_.weights);
        add(far_.x, far_.w);
        for (const Ray& ray : cloud_.tails) {
            auto [I, g] = ray_kernel(ray, X, beta_);
            S += ray.density * I;
            gS += ray.density * g;
        }
        DBetaValue v;
        v.S = S;
        v.gradS = gS;
        v.D = std::pow(S, -1 / beta_);
        v.grad = -(1 / beta_) * std::pow(S, -1 / beta_ - 1) * gS;
        return v;
    }

private:
    const BoundaryCloud& cloud_;
    double beta_;
    WeightedPoints far_;
    double spacing_ = 0;
};

struct DBetaField {
    double beta = 1.0;
    double c_beta = 0.0;
    std::vector<double> D;           // NaN where unresolved or outside
    std::vector<Vec2> grad;
    int unresolved = 0;
};

inline DBetaField dbeta_field(const DBetaEvaluator& E, const DomainGrid& G,
                              const std::function<bool(int)>& wanted = nullptr) {
    DBetaField F;
    F.beta = E.beta();
    F.c_beta = c_beta(E.beta());
    F.D.assign(G.size(), std::numeric_limits<double>::quiet_NaN());
    F.grad.assign(G.size(), Vec2::Zero());
    for (int id = 0; id < G.size(); ++id) {
        if (!G.inside[id] || (wanted && !wanted(id))) continue;
        if (!(G.delta[id] > E.min_delta())) {
            ++F.unresolved;
            continue;
        }
        DBetaValue v = E.eval_unchecked(G.node(id));
        F.D[id] = v.D;
        F.grad[id] = v.grad;
    }
    return F;
}

/// max and min of D / delta over resolved nodes.
inline std::pair<double, double> equivalence_range(const DBetaField& F, const DomainGrid& G) {
    double lo = kInf, hi = 0;
    for (int id = 0; id < G.size(); ++id) {
        if (!std::isfinite(F.D[id])) continue;
        double r = F.D[id] / G.delta[id];
        lo = std::min(lo, r), hi = std::max(hi, r);
    }
    return {lo, hi};
}

inline void write_field_csv(const DBetaField& F, const DomainGrid& G, std::ostream& out) {
    out << "x,y,delta,Dbeta,gx,gy\n";
    out.precision(12);
    for (int id = 0; id < G.size(); ++id) {
        if (!std::isfinite(F.D[id])) continue;
        Vec2 X = G.node(id);
        out << X.x() << ',' << X.y() << ',' << G.delta[id] << ',' << F.D[id] << ',' << F.grad[id].x() << ','
            << F.grad[id].y() << '\n';
    }
}

// ---------------------------------------------------------------- mollified graph

/// eta(y) = C exp(-1/(1 - y^2)) on (-1, 1), unit mass.
inline double eta(double y) {
    static const double C = 1.0 / 0.4439938161680794;
    return std::abs(y) < 1 ? C * std::exp(-1 / (1 - y * y)) : 0.0;
}
inline double eta_d1(double y) {
    double q = 1 - y * y;
    return std::abs(y) < 1 ? eta(y) * (-2 * y / (q * q)) : 0.0;
}
inline double eta_d2(double y) {
    if (std::abs(y) >= 1) return 0.0;
    double q = 1 - y * y;
    double f = -2 * y / (q * q);
    double fp = (-2 * q * q - (-2 * y) * 2 * q * (-2 * y)) / (q * q * q * q);
    return eta(y) * (f * f + fp);
}

struct SmoothGraphValue {
    double bt = 0.0;    // b^t(p)
    double dp = 0.0;    // d/dp b^t
    double dt = 0.0;    // d/dt b^t
    double dpp = 0.0;   // d^2/dp^2 b^t
    double dtp = 0.0;   // d^2/dt dp b^t
};

/// Discrete mollification of the sampled regime graph. Kernel weights are normalized so
/// that affine functions are reproduced exactly and quadratics have the exact second derivative.
class SmoothGraph {
public:
    explicit SmoothGraph(const RegimeGraph& G) : G_(G) {
        require(G.samples.size() >= 2, ErrorKind::invalid_input, "graph has no samples");
        p0_ = G.samples.front();
        dx_ = G.samples[1] - G.samples[0];
    }

    double b(double p) const {
        double u = (p - p0_) / dx_;
        if (u < 0 || u > static_cast<double>(G_.samples.size() - 1)) return 0.0;
        std::size_t i = std::min(static_cast<std::size_t>(u), G_.samples.size() - 2);
        double f = u - static_cast<double>(i);
        return (1 - f) * G_.b_samples[i] + f * G_.b_samples[i + 1];
    }

    double spacing() const { return dx_; }
    double window_lo() const { return p0_; }
    double window_hi() const { return p0_ + dx_ * static_cast<double>(G_.samples.size() - 1); }

    SmoothGraphValue eval(double p, double t) const {
        require(t != 0.0, ErrorKind::invalid_input, "smoothing scale must be nonzero");
        double r = std::abs(t), sg = t > 0 ? 1.0 : -1.0;
        const Kernels& K = kernels(r);
        SmoothGraphValue v;
        for (std::size_t k = 0; k < K.u.size(); ++k) {
            double bv = b(p - r * K.u[k]);
            v.bt += K.k0[k] * bv;
            v.dp += K.k1[k] * bv;
            v.dpp += K.k2[k] * bv;
            v.dt += (K.k0[k] + K.u[k] * K.k1[k]) * bv;
            v.dtp += (2 * K.k1[k] + K.u[k] * K.k2[k]) * bv;
        }
        v.dp /= r;
        v.dpp /= r * r;
        v.dt *= -sg / r;
        v.dtp *= -sg / (r * r);
        return v;
    }

private:
    struct Kernels {
        std::vector<double> u, k0, k1, k2;
    };
    const RegimeGraph& G_;
    double p0_ = 0, dx_ = 1;
    mutable std::map<int, Kernels> cache_;

    const Kernels& kernels(double r) const {
        int N = static_cast<int>(std::clamp(std::ceil(2 * r / dx_), 128.0, 4096.0));
        auto it = cache_.find(N);
        if (it != cache_.end()) return it->second;
        Kernels K;
        double s0 = 0, s1 = 0, s2a = 0, s2b = 0;
        for (int k = 0; k < N; ++k) {
            double u = -1 + (k + 0.5) * 2.0 / N;
            K.u.push_back(u);
            K.k0.push_back(eta(u));
            K.k1.push_back(eta_d1(u));
            K.k2.push_back(eta_d2(u));
            s0 += eta(u);
            s1 += -u * eta_d1(u);
            s2a += eta_d2(u);
        }
        for (int k = 0; k < N; ++k) {
            K.k0[k] /= s0;
            K.k1[k] /= s1;
            K.k2[k] -= (s2a / s0) * eta(K.u[k]);
        }
        for (int k = 0; k < N; ++k) s2b += 0.5 * K.u[k] * K.u[k] * K.k2[k];
        for (int k = 0; k < N; ++k) K.k2[k] /= s2b;
        return cache_.emplace(N, std::move(K)).first->second;
    }
};

// ---------------------------------------------------------------- approximating lines

/// Radial plateau bump: 1 on |z| <= 1/2, 0 on |z| >= 1.
inline double theta_bump(double z) { return smooth_step(2 * std::abs(z) - 1); }

/// integral over R of theta_bump.
inline double c_theta() {
    static const double v = [] {
        return 1.0 + 2 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                             [](double s) { return theta_bump(s); }, 0.5, 1.0, 15, 1e-14);
    }();
    return v;
}

struct ApproxPlane {
    Vec2 base = Vec2::Zero();    // graph point of b^t over p
    Vec2 dir = Vec2(1, 0);       // unit tangent
    Vec2 normal = Vec2(0, 1);    // unit normal, on the side t > 0
    double lambda = 1.0;

    double distance(const Vec2& X) const { return std::abs((X - base).dot(normal)); }
    /// gradient of the distance to the line
    Vec2 N(const Vec2& X) const { return (X - base).dot(normal) >= 0 ? normal : Vec2(-normal); }
};

/// Lambda(p,t) and lambda(p,t) = (integral of theta_{p,t} d sigma) / (integral over Lambda of theta_{p,t}).
inline ApproxPlane approx_plane(const RegimeGraph& G, const SmoothGraph& SG, const BoundaryCloud& cloud, double p,
                                double t) {
    SmoothGraphValue v = SG.eval(p, t);
    ApproxPlane L;
    L.base = G.frame.point(p, v.bt);
    Vec2 tan = G.frame.e + v.dp * G.frame.n;
    L.dir = tan.normalized();
    L.normal = Vec2(-L.dir.y(), L.dir.x());
    if (L.normal.dot(G.frame.n) < 0) L.normal = -L.normal;
    double r = std::abs(t);
    double spacing = cloud.mean_spacing();
    int m = std::max(1, static_cast<int>(std::ceil(64 * spacing / r)));
    double num = 0;
    for (int i : cloud.index().radius(L.base, r + 2 * spacing)) {
        const Vec2& y = cloud.points[i];
        int jm = cloud.chain_neighbor(i, -1), jp = cloud.chain_neighbor(i, 1);
        if (jm < 0 && jp < 0) {
            num += cloud.weights[i] * theta_bump((L.base - y).norm() / r);
            continue;
        }
        Vec2 em = jm >= 0 ? Vec2(0.5 * (cloud.points[jm] + y)) : Vec2(y - 0.5 * (cloud.points[jp] - y));
        Vec2 ep = jp >= 0 ? Vec2(0.5 * (cloud.points[jp] + y)) : Vec2(y - 0.5 * (cloud.points[jm] - y));
        double lm = (em - y).norm(), lp = (ep - y).norm();
        for (auto [e, l] : {std::pair{em, lm}, std::pair{ep, lp}}) {
            double w = cloud.weights[i] * l / (lm + lp) / m;
            for (int k = 0; k < m; ++k) num += w * theta_bump((L.base - (y + (e - y) * ((k + 0.5) / m))).norm() / r);
        }
    }
    for (const Ray& ray : cloud.tails) {
        // rays meeting the window: midpoint rule along the chord
        Vec2 d = ray.dir.normalized();
        double s0 = std::max(0.0, (L.base - ray.origin).dot(d) - r), s1 = (L.base - ray.origin).dot(d) + r;
        if (s1 <= s0) continue;
        int n = std::max(64, static_cast<int>(std::ceil((s1 - s0) / (r / 64))));
        for (int k = 0; k < n; ++k) {
            Vec2 y = ray.origin + (s0 + (k + 0.5) * (s1 - s0) / n) * d;
            num += ray.density * (s1 - s0) / n * theta_bump((L.base - y).norm() / r);
        }
    }
    L.lambda = num / (c_theta() * r);
    return L;
}

struct PlaneResiduals {
    double value = 0.0;      // |D^{-beta} - c_beta lambda dist^{-beta}|
    double gradient = 0.0;   // |grad D / D - N / dist|
    double value_normalized = 0.0;     // value / (l^{-beta} alpha_beta)
    double gradient_normalized = 0.0;  // gradient / (l^{-1} alpha_beta)
    double lambda = 1.0;
};

/// Residuals between D_beta and the distance to Lambda(p,t) at X, under the admissibility
/// hypotheses p in Pi(2^5 B_Q), 2^{-5} l(Q) <= |t| <= 2^5 l(Q), X in W(Q).
inline PlaneResiduals plane_compare(const DyadicTree& T, int q, const Vec2& X, double p, double t,
                                    const RegimeGraph& G, const SmoothGraph& SG, const BoundaryCloud& cloud,
                                    const DBetaEvaluator& E, double alpha_beta_q) {
    const DyadicCube& Q = T[q];
    const double l = Q.ell();
    require(std::abs(p - G.frame.pi(Q.xq)) <= 32 * l, ErrorKind::invalid_input, "p outside Pi(2^5 B_Q)");
    require(std::abs(t) >= l / 32, ErrorKind::invalid_input, "|t| < 2^-5 l(Q)");
    require(std::abs(t) <= 32 * l, ErrorKind::invalid_input, "|t| > 2^5 l(Q)");
    auto [near, delta] = cloud.distance(X);
    require(delta > l / 2 && delta <= l, ErrorKind::invalid_input, "X outside W(Q): delta not in (l/2, l]");
    require(T.cube_of(near, Q.k) == q, ErrorKind::invalid_input, "X outside W(Q): nearest point not in Q");
    ApproxPlane L = approx_plane(G, SG, cloud, p, t);
    DBetaValue v = E.eval(X);
    double beta = E.beta(), cb = c_beta(beta);
    double dist = L.distance(X);
    PlaneResiduals r;
    r.lambda = L.lambda;
    r.value = std::abs(v.S - cb * L.lambda * std::pow(dist, -beta));
    r.gradient = (v.grad / v.D - L.N(X) / dist).norm();
    if (alpha_beta_q > 0) {
        r.value_normalized = r.value / (std::pow(l, -beta) * alpha_beta_q);
        r.gradient_normalized = r.gradient / (alpha_beta_q / l);
    }
    return r;
}

/// Windowed Carleson sum of |d_t b^t|^2 + |t d_p d_p b^t|^2 + |t d_t d_p b^t|^2 dt/t dp over
/// [p0 - r, p0 + r] x (t_min, r], divided by eps0^2 r.
inline double graph_carleson_ratio(const SmoothGraph& SG, double p0, double r, double t_min, double eps0,
                                   int np = 64, int per_octave = 8) {
    int nt = std::max(1, static_cast<int>(std::ceil(std::log2(r / t_min) * per_octave)));
    double dlog = std::log(r / t_min) / nt;
    double sum = 0;
    for (int j = 0; j < nt; ++j) {
        double t = t_min * std::exp((j + 0.5) * dlog);
        for (int i = 0; i < np; ++i) {
            double p = p0 - r + (i + 0.5) * 2 * r / np;
            SmoothGraphValue v = SG.eval(p, t);
            double f = v.dt * v.dt + t * t * (v.dpp * v.dpp + v.dtp * v.dtp);
            sum += f * dlog * (2 * r / np);
        }
    }
    return sum / (eps0 * eps0 * r);
}

} // namespace urg
