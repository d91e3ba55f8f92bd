#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace urg {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = std::numbers::pi;

enum class ErrorKind { invalid_input, resolution_exceeded, numeric_failure, invariant_violation };

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::resolution_exceeded: return "resolution-exceeded";
    case ErrorKind::numeric_failure: return "numeric-failure";
    case ErrorKind::invariant_violation: return "invariant-violation";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Distance from x to the segment [a, b].
inline double segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    Vec2 ab = b - a;
    double L2 = ab.squaredNorm();
    if (L2 == 0.0) return (x - a).norm();
    double s = std::clamp((x - a).dot(ab) / L2, 0.0, 1.0);
    return (x - (a + s * ab)).norm();
}

/// Smallest-angle difference between two undirected line angles, in [0, pi/2].
inline double line_angle_gap(double a, double b) {
    double d = std::fmod(std::abs(a - b), kPi);
    return std::min(d, kPi - d);
}

inline double wrap_angle(double th) {
    double w = std::fmod(th, kPi);
    if (w < 0) w += kPi;
    if (w >= kPi) w -= kPi;
    return w;
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

inline std::vector<double> logspace(double a, double b, int n) {
    std::vector<double> v = linspace(std::log(a), std::log(b), n);
    for (double& x : v) x = std::exp(x);
    return v;
}

} // namespace urg
