#pragma once

// Boundaries as weighted point clouds, the dyadic pseudo-cube hierarchy built
// on them, masked grids carrying the distance to the boundary, and Whitney
// regions.

#include "urg/core.hpp"
#include "urg/kdtree.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

namespace urg {

/// Analytic far-field piece of the boundary: the ray origin + s*dir, s >= 0,
/// carrying arclength density `density`.
struct Ray {
    Vec2 origin = Vec2::Zero();
    Vec2 dir = Vec2(1, 0);
    double density = 1.0;

    double distance(const Vec2& x) const {
        double s = std::max(0.0, (x - origin).dot(dir));
        return (x - (origin + s * dir)).norm();
    }

    /// Length of the ray inside the closed ball B(c, r), times the density.
    double mass_in_ball(const Vec2& c, double r) const {
        Vec2 d = origin - c;
        double b = d.dot(dir), q = d.squaredNorm() - r * r;
        double disc = b * b - q;
        if (disc <= 0) return 0.0;
        double s0 = -b - std::sqrt(disc), s1 = -b + std::sqrt(disc);
        s0 = std::max(s0, 0.0);
        return s1 > s0 ? density * (s1 - s0) : 0.0;
    }
};

/// Consecutive cloud points [begin, end) joined by segments; closed chains
/// also join end-1 to begin.
struct Chain {
    int begin = 0, end = 0;
    bool closed = false;
};

struct BoundaryCloud {
    std::vector<Vec2> points;
    std::vector<double> weights;
    std::vector<Chain> chains;
    std::vector<Ray> tails;

    int size() const { return static_cast<int>(points.size()); }
    bool bounded() const { return tails.empty(); }

    void validate() const {
        require(!points.empty(), ErrorKind::invalid_input, "empty cloud");
        require(points.size() == weights.size(), ErrorKind::invalid_input, "points/weights length mismatch");
        for (double w : weights)
            require(w > 0 && std::isfinite(w), ErrorKind::invalid_input, "cloud weights must be positive");
    }

    double total_mass() const {
        double m = 0;
        for (double w : weights) m += w;
        return m;
    }

    /// Neighbour of point i along its chain (step = +1 or -1), or -1.
    int chain_neighbor(int i, int step) const {
        for (const Chain& c : chains) {
            if (i < c.begin || i >= c.end) continue;
            int j = i + step;
            if (j >= c.begin && j < c.end) return j;
            if (c.closed && c.end - c.begin > 2) return j < c.begin ? c.end - 1 : c.begin;
            return -1;
        }
        return -1;
    }

    const KdTree& index() const {
        if (!index_ || index_size_ != points.size()) {
            index_ = std::make_shared<KdTree>(points, &weights);
            index_size_ = points.size();
        }
        return *index_;
    }

    double mass_in_ball(const Vec2& c, double r) const {
        double m = 0;
        for (int i : index().radius(c, r)) m += weights[i];
        for (const Ray& ray : tails) m += ray.mass_in_ball(c, r);
        return m;
    }

    /// Distance to the sampled boundary: nearest point, its chain segments, and the rays.
    std::pair<int, double> distance(const Vec2& x) const {
        auto [i, d] = index().nearest(x);
        for (int step : {-1, 1}) {
            int j = chain_neighbor(i, step);
            if (j >= 0) d = std::min(d, segment_distance(x, points[i], points[j]));
        }
        for (const Ray& ray : tails) d = std::min(d, ray.distance(x));
        return {i, d};
    }

    /// Mean nearest-neighbour distance.
    double mean_spacing() const {
        if (points.size() < 2) return 0.0;
        double s = 0;
        for (const Vec2& p : points) {
            auto nn = index().knn(p, 2);
            s += (points[nn[1]] - p).norm();
        }
        return s / static_cast<double>(points.size());
    }

    double min_spacing() const {
        if (points.size() < 2) return 0.0;
        double s = kInf;
        for (const Vec2& p : points) {
            auto nn = index().knn(p, 2);
            s = std::min(s, (points[nn[1]] - p).norm());
        }
        return s;
    }

    /// Diameter of the point set (infinite when far-field rays are attached).
    double diam() const {
        if (!tails.empty()) return kInf;
        std::vector<Vec2> hull = convex_hull(points);
        double d = 0;
        for (std::size_t a = 0; a < hull.size(); ++a)
            for (std::size_t b = a + 1; b < hull.size(); ++b) d = std::max(d, (hull[a] - hull[b]).norm());
        return d;
    }

    static std::vector<Vec2> convex_hull(std::vector<Vec2> p) {
        std::sort(p.begin(), p.end(), [](const Vec2& a, const Vec2& b) {
            return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
        });
        if (p.size() < 3) return p;
        std::vector<Vec2> h(2 * p.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            while (k >= 2 && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0) --k;
            h[k++] = p[i];
        }
        for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
            while (k >= t && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0) --k;
            h[k++] = p[i];
        }
        h.resize(k - 1);
        return h;
    }

private:
    mutable std::shared_ptr<KdTree> index_;
    mutable std::size_t index_size_ = 0;
};

// ---------------------------------------------------------------- generators

inline double triangle_wave(double x, double amplitude, double period) {
    double u = x / period;
    return amplitude * (1.0 - 4.0 * std::abs(u - std::floor(u + 0.5)));
}

/// Graph of g over [x0, x1] sampled at n cell midpoints; each weight is the chord
/// length of its cell. Optional horizontal rays continue the graph at height
/// `tail_height` with density `tail_density`.
inline BoundaryCloud make_graph_cloud(const std::function<double(double)>& g, double x0, double x1, int n,
                                      bool tails = false, double tail_density = 1.0, double tail_height = 0.0) {
    require(n >= 1 && x1 > x0, ErrorKind::invalid_input, "graph cloud needs n >= 1 and x1 > x0");
    BoundaryCloud c;
    double dx = (x1 - x0) / n;
    for (int i = 0; i < n; ++i) {
        double a = x0 + i * dx, b = a + dx, m = a + 0.5 * dx;
        c.points.emplace_back(m, g(m));
        c.weights.push_back(std::hypot(dx, g(b) - g(a)));
    }
    c.chains.push_back({0, n, false});
    if (tails) {
        c.tails.push_back({Vec2(x1, tail_height), Vec2(1, 0), tail_density});
        c.tails.push_back({Vec2(x0, tail_height), Vec2(-1, 0), tail_density});
    }
    return c;
}

inline BoundaryCloud make_line_cloud(double half_length, double spacing, bool tails = true) {
    int n = static_cast<int>(std::lround(2 * half_length / spacing));
    return make_graph_cloud([](double) { return 0.0; }, -half_length, half_length, n, tails, 1.0, 0.0);
}

inline BoundaryCloud make_segment_cloud(const Vec2& a, const Vec2& b, int n) {
    BoundaryCloud c;
    double L = (b - a).norm();
    for (int i = 0; i < n; ++i) {
        c.points.push_back(a + (b - a) * ((i + 0.5) / n));
        c.weights.push_back(L / n);
    }
    c.chains.push_back({0, n, false});
    return c;
}

inline BoundaryCloud make_sawtooth_cloud(double amplitude, double period, double half_length, double spacing,
                                         bool tails = true) {
    int n = static_cast<int>(std::lround(2 * half_length / spacing));
    double slope = 4 * amplitude / period;
    return make_graph_cloud([=](double x) { return triangle_wave(x, amplitude, period); }, -half_length,
                            half_length, n, tails, std::sqrt(1 + slope * slope), 0.0);
}

inline BoundaryCloud make_circle_cloud(const Vec2& center, double radius, int n) {
    BoundaryCloud c;
    for (int i = 0; i < n; ++i) {
        double th = 2 * kPi * (i + 0.5) / n;
        c.points.push_back(center + radius * Vec2(std::cos(th), std::sin(th)));
        c.weights.push_back(2 * kPi * radius / n);
    }
    c.chains.push_back({0, n, true});
    return c;
}

/// Closed diamond |x - cx| + |t| = 1/2 sampled with `per_side` points per edge.
inline void append_diamond(BoundaryCloud& c, double cx, int per_side) {
    const Vec2 v[4] = {{cx + 0.5, 0.0}, {cx, 0.5}, {cx - 0.5, 0.0}, {cx, -0.5}};
    int b = c.size();
    double side = std::sqrt(0.5);
    for (int e = 0; e < 4; ++e)
        for (int i = 0; i < per_side; ++i) {
            c.points.push_back(v[e] + (v[(e + 1) % 4] - v[e]) * ((i + 0.5) / per_side));
            c.weights.push_back(side / per_side);
        }
    c.chains.push_back({b, c.size(), true});
}

/// Comb boundary: diamonds centred at (2k, 0) for |k| <= images, and two rays along
/// t = 0 with the average density sqrt(2) starting past the diamond of index tail_after
/// (default: images).
inline BoundaryCloud make_comb_cloud(int images, double spacing, int tail_after = -1) {
    BoundaryCloud c;
    int per_side = std::max(1, static_cast<int>(std::ceil(std::sqrt(0.5) / spacing)));
    for (int k = -images; k <= images; ++k) append_diamond(c, 2.0 * k, per_side);
    double edge = 2.0 * std::max(images, tail_after) + 1.0;
    c.tails.push_back({Vec2(edge, 0), Vec2(1, 0), std::sqrt(2.0)});
    c.tails.push_back({Vec2(-edge, 0), Vec2(-1, 0), std::sqrt(2.0)});
    return c;
}

inline bool inside_comb(const Vec2& X) {
    double k = std::round(X.x() / 2.0);
    return std::abs(X.x() - 2.0 * k) + std::abs(X.y()) >= 0.5;
}

// ---------------------------------------------------------------- CSV

inline BoundaryCloud read_cloud_csv(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open cloud file " + path);
    std::string line;
    std::getline(in, line);
    require(line.rfind("x,y,w", 0) == 0, ErrorKind::invalid_input, "cloud CSV header must be x,y,w");
    BoundaryCloud c;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, w;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, w, ',');
        c.points.emplace_back(std::stod(a), std::stod(b));
        c.weights.push_back(std::stod(w));
    }
    c.validate();
    return c;
}

inline void write_cloud_csv(const BoundaryCloud& c, std::ostream& out) {
    out << "x,y,w\n";
    out.precision(17);
    for (int i = 0; i < c.size(); ++i) out << c.points[i].x() << ',' << c.points[i].y() << ',' << c.weights[i] << '\n';
}

// ---------------------------------------------------------------- Ahlfors

struct AhlforsConstants {
    double lower = kInf, upper = 0.0;
};

/// Tightest C_lower <= sigma(B(x,r))/r^d <= C_upper over the sampled family (d = 1).
inline AhlforsConstants ahlfors_constants(const BoundaryCloud& c, int centers, int radii) {
    c.validate();
    AhlforsConstants k;
    double rmin = 4 * c.min_spacing();
    double diam = c.diam();
    double rmax = std::isfinite(diam) ? diam / 4 : 0.25 * (c.index().nodes()[0].hi - c.index().nodes()[0].lo).norm();
    if (!(rmin > 0) || rmax <= rmin) rmax = rmin = std::max(rmin, 1e-12);
    int nc = std::max(1, std::min(centers, c.size()));
    for (int a = 0; a < nc; ++a) {
        int i = static_cast<int>((static_cast<long long>(a) * c.size()) / nc + (c.size() / nc) / 2);
        i = std::min(i, c.size() - 1);
        for (double r : logspace(rmin, rmax, std::max(1, radii))) {
            double ratio = c.mass_in_ball(c.points[i], r) / r;
            k.lower = std::min(k.lower, ratio);
            k.upper = std::max(k.upper, ratio);
        }
    }
    return k;
}

// ---------------------------------------------------------------- dyadic cubes

struct DyadicCube {
    int id = -1;
    int k = 0;
    int center = -1;  // cloud index of x_Q
    Vec2 xq = Vec2::Zero();
    std::vector<int> members;
    int parent = -1;
    std::vector<int> children;
    double sigma = 0.0;

    double ell() const { return std::ldexp(1.0, -k); }
};

struct DyadicTree {
    int k_min = 0, k_max = 0;
    std::vector<DyadicCube> cubes;
    std::vector<std::vector<int>> by_gen;      // cube ids per generation
    std::vector<std::vector<int>> point_cube;  // per generation: cube id of each point
    double a0 = 1.0;

    const DyadicCube& operator[](int id) const { return cubes[id]; }
    const std::vector<int>& generation(int k) const { return by_gen[k - k_min]; }
    int cube_of(int point, int k) const { return point_cube[k - k_min][point]; }

    bool contains(int anc, int q) const {
        while (q >= 0 && cubes[q].k > cubes[anc].k) q = cubes[q].parent;
        return q == anc;
    }

    std::vector<int> descendants(int id, bool include_self = true) const {
        std::vector<int> out, stack{id};
        while (!stack.empty()) {
            int q = stack.back();
            stack.pop_back();
            if (q != id || include_self) out.push_back(q);
            for (auto it = cubes[q].children.rbegin(); it != cubes[q].children.rend(); ++it) stack.push_back(*it);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<int> ancestors(int id) const {
        std::vector<int> out;
        for (int q = cubes[id].parent; q >= 0; q = cubes[q].parent) out.push_back(q);
        return out;
    }

    int cube_near(const Vec2& x, int k, const BoundaryCloud& c) const { return cube_of(c.index().nearest(x).first, k); }
};

/// Generation index of the top cube for a bounded cloud: 2^{-k-1} <= diam <= 2^{-k}.
inline int top_generation(double diam) {
    require(diam > 0 && std::isfinite(diam), ErrorKind::invalid_input, "top generation needs a finite positive diameter");
    return -static_cast<int>(std::ceil(std::log2(diam)));
}

inline DyadicTree build_dyadic(const BoundaryCloud& cloud, int k_min, int k_max) {
    require(!cloud.points.empty(), ErrorKind::invalid_input, "empty cloud");
    cloud.validate();
    require(k_min <= k_max, ErrorKind::invalid_input, "k_min > k_max");
    double diam = cloud.diam();
    if (diam > 0) require(std::ldexp(1.0, -k_min) <= 2 * diam, ErrorKind::invalid_input, "2^{-k_min} exceeds the top-generation size");
    require(cloud.mean_spacing() <= std::ldexp(1.0, -k_max), ErrorKind::resolution_exceeded,
            "cloud spacing coarser than 2^{-k_max}");

    const int n = cloud.size();
    const int G = k_max - k_min + 1;
    DyadicTree T;
    T.k_min = k_min;
    T.k_max = k_max;
    T.by_gen.resize(G);
    T.point_cube.assign(G, std::vector<int>(n, -1));

    // Generation k_min: greedy farthest-point 2^{-k}-net over the cloud. Finer generations: the
    // same net built inside each parent cube from the members lying at least 2^{-k}/4 from every
    // non-member, so that no parent boundary passes close to a child centre, then topped up
    // until every member is within 2^{-k} of a centre. Members go to the nearest sibling centre.
    const KdTree& index = cloud.index();
    auto farthest_net = [&](const std::vector<int>& cand, double r, std::vector<int> cs) {
        std::vector<double> dist(cand.size());
        for (std::size_t a = 0; a < cand.size(); ++a) {
            dist[a] = kInf;
            for (int c : cs) dist[a] = std::min(dist[a], (cloud.points[cand[a]] - cloud.points[c]).norm());
        }
        for (;;) {
            std::size_t far = 0;
            for (std::size_t a = 1; a < cand.size(); ++a)
                if (dist[a] > dist[far]) far = a;
            if (cand.empty() || dist[far] <= r) break;
            int c = cand[far];
            cs.push_back(c);
            for (std::size_t a = 0; a < cand.size(); ++a)
                dist[a] = std::min(dist[a], (cloud.points[cand[a]] - cloud.points[c]).norm());
        }
        return cs;
    };
    // nearest centre, ties towards the lowest point index
    auto assign = [&](const std::vector<int>& pts, const std::vector<int>& cs, int g) {
        std::vector<Vec2> cp;
        for (int c : cs) cp.push_back(cloud.points[c]);
        std::vector<double> unit(cs.size(), 1.0);
        KdTree ctree(cp, &unit, 4);
        std::vector<int> ids;
        for (int c : cs) {
            DyadicCube Q;
            Q.id = static_cast<int>(T.cubes.size());
            Q.k = k_min + g;
            Q.center = c;
            Q.xq = cloud.points[c];
            if (g > 0) {
                Q.parent = T.point_cube[g - 1][c];
                T.cubes[Q.parent].children.push_back(Q.id);
            }
            T.by_gen[g].push_back(Q.id);
            ids.push_back(Q.id);
            T.cubes.push_back(Q);
        }
        for (int i : pts) {
            const Vec2& x = cloud.points[i];
            auto [j, d] = ctree.nearest(x);
            int best = j;
            for (int cand : ctree.radius(x, d * (1 + 1e-14) + 1e-300))
                if (cs[cand] < cs[best] && (cp[cand] - x).norm() <= d) best = cand;
            DyadicCube& Q = T.cubes[ids[best]];
            T.point_cube[g][i] = Q.id;
            Q.members.push_back(i);
            Q.sigma += cloud.weights[i];
        }
    };

    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    assign(all, farthest_net(all, std::ldexp(1.0, -k_min), {0}), 0);
    for (int g = 1; g < G; ++g) {
        const double l = std::ldexp(1.0, -(k_min + g));
        const std::vector<int> parents = T.by_gen[g - 1];
        for (int pid : parents) {
            const std::vector<int> mem = T.cubes[pid].members;
            std::vector<int> inner;
            std::vector<double> margin(mem.size(), l / 4);
            std::size_t seed = 0;
            for (std::size_t a = 0; a < mem.size(); ++a) {
                const Vec2& x = cloud.points[mem[a]];
                for (int j : index.radius(x, l / 4))
                    if (T.point_cube[g - 1][j] != pid) margin[a] = std::min(margin[a], (cloud.points[j] - x).norm());
                if (margin[a] >= l / 4) inner.push_back(mem[a]);
                if (margin[a] > margin[seed]) seed = a;
            }
            std::vector<int> cs = inner.empty() ? std::vector<int>{mem[seed]} : farthest_net(inner, l, {mem[seed]});
            // cover the rest: for the farthest uncovered member, the best-margin member within l/2 of it
            for (;;) {
                std::size_t far = 0;
                double fd = -1;
                for (std::size_t a = 0; a < mem.size(); ++a) {
                    double d = kInf;
                    for (int c : cs) d = std::min(d, (cloud.points[mem[a]] - cloud.points[c]).norm());
                    if (d > fd) fd = d, far = a;
                }
                if (fd <= l) break;
                std::size_t pick = far;
                for (std::size_t a = 0; a < mem.size(); ++a)
                    if ((cloud.points[mem[a]] - cloud.points[mem[far]]).norm() <= l / 2 && margin[a] > margin[pick]) pick = a;
                cs.push_back(mem[pick]);
            }
            assign(mem, cs, g);
        }
    }

    // a0: largest fraction of l(Q) around x_Q containing only members
    double a0 = 1.0;
    for (const DyadicCube& Q : T.cubes) {
        double l = Q.ell();
        for (int i : cloud.index().radius(Q.xq, l)) {
            if (T.point_cube[Q.k - k_min][i] == Q.id) continue;
            a0 = std::min(a0, (cloud.points[i] - Q.xq).norm() / l);
        }
    }
    T.a0 = a0;
    return T;
}

inline nlohmann::json tree_to_json(const DyadicTree& T) {
    nlohmann::json arr = nlohmann::json::array();
    for (const DyadicCube& Q : T.cubes)
        arr.push_back({{"k", Q.k}, {"center", {Q.xq.x(), Q.xq.y()}}, {"parent", Q.parent}, {"members", Q.members}});
    return {{"k_min", T.k_min}, {"k_max", T.k_max}, {"a0", T.a0}, {"cubes", arr}};
}

// ---------------------------------------------------------------- grids

struct DomainGrid {
    double x0 = 0, y0 = 0, h = 1;
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> inside;
    std::vector<double> delta;
    std::vector<int> nearest;
    // reflecting (Neumann) sides: left, right, bottom, top
    bool reflect[4] = {false, false, false, false};

    int id(int i, int j) const { return j * nx + i; }
    int size() const { return nx * ny; }
    Vec2 node(int i, int j) const { return {x0 + i * h, y0 + j * h}; }
    Vec2 node(int id) const { return node(id % nx, id / nx); }
    int col(int id) const { return id % nx; }
    int row(int id) const { return id / nx; }

    /// Control-volume weight of a node (halved on reflecting walls).
    double area(int i, int j) const {
        double a = h * h;
        if ((i == 0 && reflect[0]) || (i == nx - 1 && reflect[1])) a *= 0.5;
        if ((j == 0 && reflect[2]) || (j == ny - 1 && reflect[3])) a *= 0.5;
        return a;
    }
};

inline DomainGrid make_grid(const BoundaryCloud& cloud, const std::function<bool(const Vec2&)>& inside, const Vec2& lo,
                            const Vec2& hi, double h) {
    require(h > 0 && hi.x() > lo.x() && hi.y() > lo.y(), ErrorKind::invalid_input, "bad grid box");
    DomainGrid G;
    G.x0 = lo.x();
    G.y0 = lo.y();
    G.h = h;
    G.nx = static_cast<int>(std::floor((hi.x() - lo.x()) / h + 1e-9)) + 1;
    G.ny = static_cast<int>(std::floor((hi.y() - lo.y()) / h + 1e-9)) + 1;
    G.inside.assign(G.size(), 0);
    G.delta.assign(G.size(), 0.0);
    G.nearest.assign(G.size(), -1);
    for (int j = 0; j < G.ny; ++j)
        for (int i = 0; i < G.nx; ++i) {
            int id = G.id(i, j);
            Vec2 X = G.node(i, j);
            auto [k, d] = cloud.distance(X);
            G.nearest[id] = k;
            if (inside(X)) {
                G.inside[id] = 1;
                G.delta[id] = d;
            }
        }
    return G;
}

// ---------------------------------------------------------------- Whitney regions

enum class WhitneyKind { W, Wstar, Wstarstar };

inline constexpr double kDefaultKss = 1601.0;

inline std::vector<int> whitney_region(const DyadicTree& T, int q, const BoundaryCloud& cloud, const DomainGrid& G,
                                       WhitneyKind kind, double Kss = kDefaultKss) {
    const DyadicCube& Q = T[q];
    const double l = Q.ell();
    require(G.h <= l / 16 * (1 + 1e-12), ErrorKind::resolution_exceeded, "grid spacing exceeds l(Q)/16");
    double dil = 0, lo = 0, hi = 0;
    switch (kind) {
    case WhitneyKind::W: dil = l, lo = l / 2, hi = l; break;
    case WhitneyKind::Wstar: dil = 64 * l, lo = l / 64, hi = 64 * l; break;
    case WhitneyKind::Wstarstar: dil = Kss * l, lo = l / Kss, hi = Kss * l; break;
    }
    double reach = dil + hi;
    int i0 = std::max(0, static_cast<int>(std::floor((Q.xq.x() - reach - G.x0) / G.h)));
    int i1 = std::min(G.nx - 1, static_cast<int>(std::ceil((Q.xq.x() + reach - G.x0) / G.h)));
    int j0 = std::max(0, static_cast<int>(std::floor((Q.xq.y() - reach - G.y0) / G.h)));
    int j1 = std::min(G.ny - 1, static_cast<int>(std::ceil((Q.xq.y() + reach - G.y0) / G.h)));
    std::vector<int> out;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            int id = G.id(i, j);
            if (!G.inside[id]) continue;
            double d = G.delta[id];
            if (!(d > lo && d <= hi)) continue;
            int x = G.nearest[id];
            if (x < 0) continue;
            bool ok = kind == WhitneyKind::W ? T.cube_of(x, Q.k) == q : (cloud.points[x] - Q.xq).norm() <= dil;
            if (ok) out.push_back(id);
        }
    return out;
}

} // namespace urg
