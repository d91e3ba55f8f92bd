#pragma once

// Divergence-form elliptic problems on masked grids: operator fields and
// their builders, a matrix-free finite-volume solver with preconditioned
// conjugate gradients, Green functions, Carleson norms, the square function
// and harmonic-measure diagnostics.

#include "urg/graph.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <sstream>

namespace urg {

struct OperatorField {
    std::vector<Mat2> A;  // per grid node
    std::vector<Mat2> B, C;  // optional split A = B + C
    bool has_split = false;
};

/// Smallest C with C^{-1}|xi|^2 <= A xi.xi and |A xi.zeta| <= C|xi||zeta|.
inline double ellipticity(const Mat2& A) {
    Mat2 S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat2> es(S);
    double lo = es.eigenvalues()(0);
    Eigen::JacobiSVD<Mat2> svd(A);
    double hi = svd.singularValues()(0);
    if (lo <= 0) return kInf;
    return std::max(1 / lo, hi);
}

inline double ellipticity(const OperatorField& op, const DomainGrid& G) {
    double c = 1;
    for (int id = 0; id < G.size(); ++id)
        if (G.inside[id]) c = std::max(c, ellipticity(op.A[id]));
    return c;
}

inline Mat2 rotation(double phi) {
    Mat2 R;
    R << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
    return R;
}

// ---------------------------------------------------------------- builders

inline OperatorField identity_operator(const DomainGrid& G) {
    OperatorField op;
    op.A.assign(G.size(), Mat2::Identity());
    return op;
}

/// A(X) = R(omega atan(y)) diag(1, anisotropy) R^T: smooth, with delta |grad A| bounded.
inline OperatorField rotation_operator(const DomainGrid& G, double omega, double anisotropy) {
    require(anisotropy > 0, ErrorKind::invalid_input, "anisotropy must be positive");
    OperatorField op;
    op.A.resize(G.size());
    Mat2 D = Mat2::Zero();
    D(0, 0) = 1, D(1, 1) = anisotropy;
    for (int id = 0; id < G.size(); ++id) {
        Mat2 R = rotation(omega * std::atan(G.node(id).y()));
        op.A[id] = R * D * R.transpose();
    }
    return op;
}

/// A = I + C with C = amplitude * diag(1, -1) on the Whitney bands delta in (2^{-j-1}, 2^{-j}],
/// j in {1, 2, 4, 8, ...}, over the left half of each dyadic interval of length 2^{-j}.
inline OperatorField sparse_perturbation(const DomainGrid& G, double amplitude) {
    require(std::abs(amplitude) < 1, ErrorKind::invalid_input, "perturbation amplitude must be below 1");
    OperatorField op;
    op.A.assign(G.size(), Mat2::Identity());
    op.B = op.A;
    op.C.assign(G.size(), Mat2::Zero());
    op.has_split = true;
    for (int id = 0; id < G.size(); ++id) {
        double d = G.delta[id];
        if (!G.inside[id] || d <= 0) continue;
        int j = static_cast<int>(std::floor(-std::log2(d)));
        if (std::ldexp(1.0, -j) < d) --j;
        if (j < 1 || (j & (j - 1)) != 0) continue;
        double len = std::ldexp(1.0, -j);
        double u = G.node(id).x() / len;
        if (u - std::floor(u) >= 0.5) continue;
        Mat2 C = Mat2::Zero();
        C(0, 0) = amplitude, C(1, 1) = -amplitude;
        op.C[id] = C;
        op.A[id] += C;
    }
    return op;
}

/// B~(X) = average of A over B(X, delta(X)/4) with the plateau bump, C~ = A - B~.
inline OperatorField mollify_operator(const OperatorField& in, const DomainGrid& G) {
    OperatorField op = in;
    op.B = in.A;
    op.C.assign(G.size(), Mat2::Zero());
    op.has_split = true;
    for (int id = 0; id < G.size(); ++id) {
        if (!G.inside[id]) continue;
        double r = G.delta[id] / 4;
        int R = static_cast<int>(std::floor(r / G.h));
        if (R < 1) continue;
        int i0 = G.col(id), j0 = G.row(id);
        Mat2 s = Mat2::Zero();
        double ws = 0;
        for (int dj = -R; dj <= R; ++dj)
            for (int di = -R; di <= R; ++di) {
                int i = i0 + di, j = j0 + dj;
                if (i < 0 || j < 0 || i >= G.nx || j >= G.ny) continue;
                double z = std::hypot(di, dj) * G.h / r;
                double w = smooth_step(2 * z - 1);
                if (w <= 0) continue;
                s += w * in.A[G.id(i, j)];
                ws += w;
            }
        op.B[id] = s / ws;
        op.C[id] = in.A[id] - op.B[id];
    }
    return op;
}

// ---------------------------------------------------------------- discretization

/// Matrix-free 9-point operator: harmonic edge means of a11 / a22 for the axial couplings,
/// cell-averaged a12 through the bilinear cross term. Edges on the rectangle boundary belong to
/// one cell and carry half weight, which encodes the natural (reflecting) condition.
class GridOperator {
public:
    GridOperator(const OperatorField& op, const DomainGrid& G) : G_(G) {
        const int n = G.size();
        require(static_cast<int>(op.A.size()) == n, ErrorKind::invalid_input, "operator field size mismatch");
        ex_.assign(n, 0.0);
        ey_.assign(n, 0.0);
        cx_.assign(n, 0.0);
        dirichlet_.assign(n, 0);
        auto hmean = [](double a, double b) { return a > 0 && b > 0 ? 2 * a * b / (a + b) : 0.0; };
        for (int j = 0; j < G.ny; ++j)
            for (int i = 0; i < G.nx; ++i) {
                int id = G.id(i, j);
                bool wall = (i == 0 && !G.reflect[0]) || (i == G.nx - 1 && !G.reflect[1]) ||
                            (j == 0 && !G.reflect[2]) || (j == G.ny - 1 && !G.reflect[3]);
                dirichlet_[id] = (!G.inside[id] || wall) ? 1 : 0;
                if (i + 1 < G.nx) {
                    double w = hmean(op.A[id](0, 0), op.A[G.id(i + 1, j)](0, 0));
                    if (j == 0 || j == G.ny - 1) w *= 0.5;
                    ex_[id] = w;
                }
                if (j + 1 < G.ny) {
                    double w = hmean(op.A[id](1, 1), op.A[G.id(i, j + 1)](1, 1));
                    if (i == 0 || i == G.nx - 1) w *= 0.5;
                    ey_[id] = w;
                }
                if (i + 1 < G.nx && j + 1 < G.ny) {
                    double c = 0;
                    for (int q : {id, G.id(i + 1, j), G.id(i, j + 1), G.id(i + 1, j + 1)})
                        c += 0.125 * (op.A[q](0, 1) + op.A[q](1, 0));
                    cx_[id] = c;  // symmetric part of a12
                }
            }
        for (int id = 0; id < n; ++id)
            if (!dirichlet_[id]) unknowns_.push_back(id);
    }

    const DomainGrid& grid() const { return G_; }
    bool is_dirichlet(int id) const { return dirichlet_[id] != 0; }
    const std::vector<int>& unknowns() const { return unknowns_; }

    /// y = A u over all nodes (full vector, Dirichlet entries included).
    void apply(const std::vector<double>& u, std::vector<double>& y) const {
        const int nx = G_.nx, ny = G_.ny;
        std::fill(y.begin(), y.end(), 0.0);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                int id = j * nx + i;
                if (i + 1 < nx && ex_[id] != 0) {
                    double f = ex_[id] * (u[id] - u[id + 1]);
                    y[id] += f, y[id + 1] -= f;
                }
                if (j + 1 < ny && ey_[id] != 0) {
                    double f = ey_[id] * (u[id] - u[id + nx]);
                    y[id] += f, y[id + nx] -= f;
                }
                if (i + 1 < nx && j + 1 < ny && cx_[id] != 0) {
                    int a = id, b = id + 1, c = id + nx, d = id + nx + 1;
                    double X = 0.5 * ((u[b] - u[a]) + (u[d] - u[c]));
                    double Y = 0.5 * ((u[c] - u[a]) + (u[d] - u[b]));
                    double k = cx_[id];
                    // d/dv of k (X_u Y_v + Y_u X_v)
                    y[a] += k * (X * -0.5 + Y * -0.5);
                    y[b] += k * (X * -0.5 + Y * 0.5);
                    y[c] += k * (X * 0.5 + Y * -0.5);
                    y[d] += k * (X * 0.5 + Y * 0.5);
                }
            }
    }

private:
    const DomainGrid& G_;
    std::vector<double> ex_, ey_, cx_;
    std::vector<std::uint8_t> dirichlet_;
    std::vector<int> unknowns_;
};

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Assembled matrix over the unknowns, in the order of GridOperator::unknowns().
inline SpMat assemble(const GridOperator& A) {
    const DomainGrid& G = A.grid();
    std::vector<int> idx(G.size(), -1);
    for (std::size_t k = 0; k < A.unknowns().size(); ++k) idx[A.unknowns()[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> tr;
    tr.reserve(A.unknowns().size() * 9);
    // probe the matrix-free operator with the nine colours of a 3x3 tiling
    std::vector<double> e(G.size()), y(G.size());
    for (int ci = 0; ci < 3; ++ci)
        for (int cj = 0; cj < 3; ++cj) {
            std::fill(e.begin(), e.end(), 0.0);
            for (int id : A.unknowns())
                if (G.col(id) % 3 == ci && G.row(id) % 3 == cj) e[id] = 1.0;
            A.apply(e, y);
            for (int id : A.unknowns()) {
                int i = G.col(id), j = G.row(id);
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        int ii = i + di, jj = j + dj;
                        if (ii < 0 || jj < 0 || ii >= G.nx || jj >= G.ny) continue;
                        if (ii % 3 != ci || jj % 3 != cj) continue;
                        int src = G.id(ii, jj);
                        if (idx[src] < 0 || y[id] == 0) continue;
                        tr.emplace_back(idx[id], idx[src], y[id]);
                    }
            }
        }
    SpMat M(static_cast<Eigen::Index>(A.unknowns().size()), static_cast<Eigen::Index>(A.unknowns().size()));
    M.setFromTriplets(tr.begin(), tr.end());
    return M;
}

/// Geometric multigrid V(1,1)-cycle with bilinear prolongation, Galerkin coarse operators,
/// symmetric Gauss-Seidel smoothing and a direct solve on the coarsest level.
class Multigrid {
public:
    Multigrid(const GridOperator& A, SpMat fine) {
        const DomainGrid& G = A.grid();
        Level L;
        L.A = std::move(fine);
        L.nx = G.nx, L.ny = G.ny;
        L.node.assign(static_cast<std::size_t>(G.nx) * G.ny, -1);
        for (std::size_t k = 0; k < A.unknowns().size(); ++k) L.node[A.unknowns()[k]] = static_cast<int>(k);
        levels_.push_back(std::move(L));
        while (levels_.back().A.rows() > 3000) {
            Level& f = levels_.back();
            bool cx = f.nx > 3, cy = f.ny > 3;
            if (!cx && !cy) break;
            Level c;
            c.nx = cx ? (f.nx + 1) / 2 : f.nx;
            c.ny = cy ? (f.ny + 1) / 2 : f.ny;
            std::vector<int> cidx(static_cast<std::size_t>(c.nx) * c.ny, -1);
            std::vector<Eigen::Triplet<double>> tr;
            int nc = 0;
            auto weights = [](bool coarsen, int i, int n) {
                std::vector<std::pair<int, double>> w;
                if (!coarsen) w.push_back({i, 1.0});
                else if (i % 2 == 0) w.push_back({i / 2, 1.0});
                else {
                    w.push_back({(i - 1) / 2, 0.5});
                    if ((i + 1) / 2 < n) w.push_back({(i + 1) / 2, 0.5});
                }
                return w;
            };
            for (int j = 0; j < f.ny; ++j)
                for (int i = 0; i < f.nx; ++i) {
                    int r = f.node[static_cast<std::size_t>(j) * f.nx + i];
                    if (r < 0) continue;
                    for (auto [ci, wi] : weights(cx, i, c.nx))
                        for (auto [cj, wj] : weights(cy, j, c.ny)) {
                            int& k = cidx[static_cast<std::size_t>(cj) * c.nx + ci];
                            if (k < 0) k = nc++;
                            tr.emplace_back(r, k, wi * wj);
                        }
                }
            if (nc >= f.A.rows()) break;
            f.P.resize(f.A.rows(), nc);
            f.P.setFromTriplets(tr.begin(), tr.end());
            c.node = std::move(cidx);
            SpMat AP = f.A * f.P;
            c.A = SpMat(f.P.transpose() * AP);
            c.A.prune(0.0);
            levels_.push_back(std::move(c));
        }
        for (Level& l : levels_) {
            l.diag.resize(l.A.rows());
            for (Eigen::Index r = 0; r < l.A.rows(); ++r) {
                l.diag[r] = l.A.coeff(r, r);
                require(l.diag[r] > 0, ErrorKind::numeric_failure, "non-positive diagonal in the discrete operator");
            }
        }
        coarse_.compute(Eigen::SparseMatrix<double>(levels_.back().A));
        require(coarse_.info() == Eigen::Success, ErrorKind::numeric_failure, "coarse factorization failed");
    }

    const SpMat& matrix() const { return levels_.front().A; }
    int depth() const { return static_cast<int>(levels_.size()); }

    void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const { z = cycle(0, r); }

private:
    struct Level {
        SpMat A, P;
        Eigen::VectorXd diag;
        int nx = 0, ny = 0;
        std::vector<int> node;
    };

    void sweep(const Level& l, const Eigen::VectorXd& b, Eigen::VectorXd& x, bool forward) const {
        const Eigen::Index n = l.A.rows();
        for (Eigen::Index s = 0; s < n; ++s) {
            Eigen::Index r = forward ? s : n - 1 - s;
            double acc = b[r];
            for (SpMat::InnerIterator it(l.A, r); it; ++it)
                if (it.col() != r) acc -= it.value() * x[it.col()];
            x[r] = acc / l.diag[r];
        }
    }

    Eigen::VectorXd cycle(std::size_t k, const Eigen::VectorXd& b) const {
        const Level& l = levels_[k];
        if (k + 1 == levels_.size()) return coarse_.solve(b);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
        sweep(l, b, x, true);
        Eigen::VectorXd r = b - l.A * x;
        Eigen::VectorXd rc = l.P.transpose() * r;
        x += l.P * cycle(k + 1, rc);
        sweep(l, b, x, false);
        return x;
    }

    std::vector<Level> levels_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> coarse_;
};

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 20000;
};

struct SolutionField {
    std::vector<double> u;  // all nodes; Dirichlet nodes hold their data
    double residual = 0.0;  // relative
    int iterations = 0;
    std::vector<double> history;
};

/// Solve -div A grad u = f with u = g on Dirichlet nodes. `load` holds f at nodes (density);
/// node loads are f times the control-volume area.
inline SolutionField solve(const GridOperator& A, const std::function<double(int)>& dirichlet,
                           const std::vector<double>& load = {}, const SolveOptions& o = {}) {
    const DomainGrid& G = A.grid();
    const int n = G.size();
    SolutionField S;
    S.u.assign(n, 0.0);
    for (int id = 0; id < n; ++id)
        if (A.is_dirichlet(id)) S.u[id] = dirichlet ? dirichlet(id) : 0.0;
    std::vector<double> b(n, 0.0), tmp(n);
    A.apply(S.u, tmp);
    for (int id : A.unknowns()) {
        double f = load.empty() ? 0.0 : load[id] * G.area(G.col(id), G.row(id));
        b[id] = f - tmp[id];
    }
    double bnorm = 0;
    for (int id : A.unknowns()) bnorm += b[id] * b[id];
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0) return S;
    const auto& U = A.unknowns();
    const Eigen::Index m = static_cast<Eigen::Index>(U.size());
    Multigrid M(A, assemble(A));
    const SpMat& K = M.matrix();
    Eigen::VectorXd bb(m), x = Eigen::VectorXd::Zero(m), z(m), q(m);
    for (Eigen::Index k = 0; k < m; ++k) bb[k] = b[U[k]];
    Eigen::VectorXd r = bb;
    M.apply(r, z);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    for (int it = 1; it <= o.max_iter; ++it) {
        q.noalias() = K * p;
        double pq = p.dot(q);
        require(pq > 0, ErrorKind::numeric_failure, "conjugate gradients lost positivity");
        double alpha = rz / pq;
        x += alpha * p;
        r -= alpha * q;
        double rel = r.norm() / bnorm;
        S.history.push_back(rel);
        S.iterations = it;
        S.residual = rel;
        if (rel <= o.tol) break;
        M.apply(r, z);
        double rz2 = r.dot(z);
        p = z + (rz2 / rz) * p;
        rz = rz2;
    }
    if (S.residual > o.tol) {
        std::ostringstream msg;
        msg << "conjugate gradients stagnated at relative residual " << S.residual << " after " << S.iterations
            << " iterations; last residuals:";
        for (std::size_t k = S.history.size() > 5 ? S.history.size() - 5 : 0; k < S.history.size(); ++k)
            msg << ' ' << S.history[k];
        fail(ErrorKind::numeric_failure, msg.str());
    }
    for (Eigen::Index k = 0; k < m; ++k) S.u[U[k]] = x[k];
    return S;
}

inline SolutionField solve(const OperatorField& op, const DomainGrid& G, const std::function<double(int)>& dirichlet,
                           const std::vector<double>& load = {}, const SolveOptions& o = {}) {
    GridOperator A(op, G);
    return solve(A, dirichlet, load, o);
}

/// Bilinear interpolation of a node field.
inline double interpolate(const DomainGrid& G, const std::vector<double>& u, const Vec2& X) {
    double fx = (X.x() - G.x0) / G.h, fy = (X.y() - G.y0) / G.h;
    int i = std::clamp(static_cast<int>(std::floor(fx)), 0, G.nx - 2);
    int j = std::clamp(static_cast<int>(std::floor(fy)), 0, G.ny - 2);
    double a = fx - i, b = fy - j;
    return (1 - a) * (1 - b) * u[G.id(i, j)] + a * (1 - b) * u[G.id(i + 1, j)] + (1 - a) * b * u[G.id(i, j + 1)] +
           a * b * u[G.id(i + 1, j + 1)];
}

/// Central-difference gradient at a node whose four neighbours exist, else one-sided.
inline Vec2 node_gradient(const DomainGrid& G, const std::vector<double>& u, int id) {
    int i = G.col(id), j = G.row(id);
    auto d = [&](int a, int b, double span) { return (u[b] - u[a]) / span; };
    double gx = i == 0 ? d(id, id + 1, G.h) : i == G.nx - 1 ? d(id - 1, id, G.h) : d(id - 1, id + 1, 2 * G.h);
    double gy = j == 0 ? d(id, id + G.nx, G.h)
              : j == G.ny - 1 ? d(id - G.nx, id, G.h)
                              : d(id - G.nx, id + G.nx, 2 * G.h);
    if ((i == 0 && G.reflect[0]) || (i == G.nx - 1 && G.reflect[1])) gx = 0;
    if ((j == 0 && G.reflect[2]) || (j == G.ny - 1 && G.reflect[3])) gy = 0;
    return {gx, gy};
}

/// Maximum principle check: interior values within the range of the Dirichlet data.
inline bool maximum_principle(const GridOperator& A, const SolutionField& S, double tol = 1e-9) {
    double lo = kInf, hi = -kInf;
    for (int id = 0; id < A.grid().size(); ++id)
        if (A.is_dirichlet(id)) lo = std::min(lo, S.u[id]), hi = std::max(hi, S.u[id]);
    double span = std::max(1.0, hi - lo);
    for (int id : A.unknowns())
        if (S.u[id] < lo - tol * span || S.u[id] > hi + tol * span) return false;
    return true;
}

// ---------------------------------------------------------------- Green functions

/// Finite pole: unit load on the pole node divided by h^2.
inline SolutionField green_finite(const OperatorField& op, const DomainGrid& G, int pole, const SolveOptions& o = {}) {
    std::vector<double> load(G.size(), 0.0);
    load[pole] = 1.0 / G.area(G.col(pole), G.row(pole));
    return solve(op, G, nullptr, load, o);
}

struct CombGreen {
    DomainGrid grid;
    SolutionField field;  // normalized so that G(1, 0) = 1
    int level = 0;
    double raw_at_pole = 0.0;
    bool positive = true;
};

inline DomainGrid comb_grid(int k, double h, double t_top) {
    require(k >= 2, ErrorKind::invalid_input, "comb truncation level must be at least 2");
    require(h <= 1.0 / 64 + 1e-15, ErrorKind::resolution_exceeded, "grid does not resolve the diamonds (h > 1/64)");
    DomainGrid G;
    G.h = h;
    G.x0 = 0;
    G.y0 = -std::ldexp(1.0, k + 1);
    G.nx = static_cast<int>(std::lround(1 / h)) + 1;
    G.ny = static_cast<int>(std::lround((t_top - G.y0) / h)) + 1;
    for (bool& r : G.reflect) r = true;
    G.inside.assign(G.size(), 0);
    G.delta.assign(G.size(), 0.0);
    G.nearest.assign(G.size(), -1);
    for (int id = 0; id < G.size(); ++id) {
        Vec2 X = G.node(id);
        if (!inside_comb(X)) continue;
        // distance to the diamonds |x - 2m| + |t| = 1/2 nearest to X (x in [0, 1])
        double best = kInf;
        for (double cx : {0.0, 2.0}) {
            Vec2 v[4] = {{cx + 0.5, 0.0}, {cx, 0.5}, {cx - 0.5, 0.0}, {cx, -0.5}};
            for (int e = 0; e < 4; ++e) best = std::min(best, segment_distance(X, v[e], v[(e + 1) % 4]));
        }
        if (best <= 1e-12) continue;  // on a diamond edge
        G.inside[id] = 1;
        G.delta[id] = best;
    }
    return G;
}

/// Pole-at-infinity approximation on the comb: load 2^{-k} on t in [-2^{k+1}, -2^k] in the
/// reflecting strip x in [0, 1], zero on the diamonds, normalized at (1, 0).
inline CombGreen green_infinity_comb(int k, double h = 1.0 / 64, double t_top = 72.0, const SolveOptions& o = {}) {
    CombGreen R;
    R.level = k;
    R.grid = comb_grid(k, h, t_top);
    const DomainGrid& G = R.grid;
    std::vector<double> load(G.size(), 0.0);
    double lo = -std::ldexp(1.0, k + 1), hi = -std::ldexp(1.0, k), w = std::ldexp(1.0, -k);
    for (int id = 0; id < G.size(); ++id) {
        double t = G.node(id).y();
        if (G.inside[id] && t >= lo - 1e-12 && t <= hi + 1e-12) load[id] = w;
    }
    OperatorField op = identity_operator(G);
    R.field = solve(op, G, nullptr, load, o);
    int pole = G.id(G.nx - 1, static_cast<int>(std::lround(-G.y0 / h)));
    R.raw_at_pole = R.field.u[pole];
    require(R.raw_at_pole > 0, ErrorKind::numeric_failure, "comb Green function vanishes at the normalization point");
    for (double& v : R.field.u) v /= R.raw_at_pole;
    for (int id = 0; id < G.size(); ++id)
        if (G.inside[id] && !(R.field.u[id] > 0)) R.positive = false;
    return R;
}

// ---------------------------------------------------------------- Carleson norms and square functions

struct Ball {
    Vec2 c;
    double r;
};

/// Centres on a boundary net at spacing r/4, radii dyadic in [r_min, r_max].
inline std::vector<Ball> boundary_balls(const BoundaryCloud& cloud, const std::function<bool(const Vec2&)>& keep,
                                        double r_min, double r_max) {
    std::vector<Ball> out;
    for (double r = r_max; r >= r_min * (1 - 1e-12); r /= 2) {
        double last = -kInf;
        Vec2 lastp = Vec2::Zero();
        bool have = false;
        for (int i = 0; i < cloud.size(); ++i) {
            const Vec2& p = cloud.points[i];
            if (!keep(p)) continue;
            if (have && (p - lastp).norm() < r / 4) continue;
            out.push_back({p, r});
            lastp = p;
            have = true;
            last = p.x();
        }
        (void)last;
    }
    return out;
}

/// sup over balls of r^{-1} sum_{B cap Omega} f^2 delta^{-1} dA.
inline double cm_norm(const std::vector<double>& f, const DomainGrid& G, const std::vector<Ball>& balls) {
    double best = 0;
    for (const Ball& B : balls) {
        double s = 0;
        int i0 = std::max(0, static_cast<int>(std::floor((B.c.x() - B.r - G.x0) / G.h)));
        int i1 = std::min(G.nx - 1, static_cast<int>(std::ceil((B.c.x() + B.r - G.x0) / G.h)));
        int j0 = std::max(0, static_cast<int>(std::floor((B.c.y() - B.r - G.y0) / G.h)));
        int j1 = std::min(G.ny - 1, static_cast<int>(std::ceil((B.c.y() + B.r - G.y0) / G.h)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                int id = G.id(i, j);
                if (!G.inside[id] || G.delta[id] <= 0 || f[id] == 0) continue;
                if ((G.node(i, j) - B.c).norm() > B.r) continue;
                s += f[id] * f[id] / G.delta[id] * G.area(i, j);
            }
        best = std::max(best, s / B.r);
    }
    return best;
}

struct SquareFunctionReport {
    double worst = 0.0;
    std::vector<double> per_ball;
};

/// max over balls of (sum |grad u|^2 delta dA) / (||u||_inf^2 sigma(B cap boundary)).
inline SquareFunctionReport square_function(const DomainGrid& G, const std::vector<double>& u,
                                            const BoundaryCloud& cloud, const std::vector<Ball>& balls) {
    double umax = 0;
    for (int id = 0; id < G.size(); ++id)
        if (G.inside[id]) umax = std::max(umax, std::abs(u[id]));
    SquareFunctionReport R;
    for (const Ball& B : balls) {
        double s = 0;
        int i0 = std::max(0, static_cast<int>(std::floor((B.c.x() - B.r - G.x0) / G.h)));
        int i1 = std::min(G.nx - 1, static_cast<int>(std::ceil((B.c.x() + B.r - G.x0) / G.h)));
        int j0 = std::max(0, static_cast<int>(std::floor((B.c.y() - B.r - G.y0) / G.h)));
        int j1 = std::min(G.ny - 1, static_cast<int>(std::ceil((B.c.y() + B.r - G.y0) / G.h)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                int id = G.id(i, j);
                if (!G.inside[id] || (G.node(i, j) - B.c).norm() > B.r) continue;
                s += node_gradient(G, u, id).squaredNorm() * G.delta[id] * G.area(i, j);
            }
        double sig = cloud.mass_in_ball(B.c, B.r);
        double v = (umax > 0 && sig > 0) ? s / (umax * umax * sig) : 0.0;
        R.per_ball.push_back(v);
        R.worst = std::max(R.worst, v);
    }
    return R;
}

// ---------------------------------------------------------------- harmonic measure

/// omega^X(E): the solution with Dirichlet data 1_E evaluated at X. `fraction` gives, per Dirichlet
/// node, the share of its boundary cell lying in E (1/2 at endpoints keeps second order).
inline double harmonic_measure(const GridOperator& A, const std::function<double(int)>& fraction, const Vec2& X,
                               const SolveOptions& o = {}) {
    SolutionField S = solve(A, fraction, {}, o);
    return interpolate(A.grid(), S.u, X);
}

struct AinftyFit {
    double C = 0.0, theta = 0.0;  // log(sigma(F)/sigma(D)) ~ log C + theta log omega(F)
    std::vector<std::pair<double, double>> samples;  // (omega(F), sigma(F)/sigma(D))
};

/// Dyadic sub-intervals of the boundary nodes with x in [a, b], down to `levels` generations.
inline AinftyFit ainfty_diagnostic(const GridOperator& A, const std::function<double(int)>& boundary_x, double a,
                                   double b, const Vec2& pole, int levels, const SolveOptions& o = {}) {
    AinftyFit F;
    for (int lev = 1; lev <= levels; ++lev) {
        int parts = 1 << lev;
        for (int k = 0; k < parts; ++k) {
            double lo = a + (b - a) * k / parts, hi = a + (b - a) * (k + 1) / parts;
            double w = harmonic_measure(
                A, [&](int id) { double x = boundary_x(id); return x >= lo && x < hi ? 1.0 : 0.0; }, pole, o);
            if (w > 0) F.samples.push_back({w, 1.0 / parts});
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(F.samples.size());
    for (auto [w, s] : F.samples) {
        double x = std::log(w), y = std::log(s);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    if (n >= 2) {
        F.theta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        F.C = std::exp((sy - F.theta * sx) / n);
    }
    return F;
}

} // namespace urg
