#pragma once

// Linear programming kernels: a dense two-phase simplex with Bland's rule, and
// an uncapacitated min-cost transshipment solver (successive shortest paths).

#include "urg/core.hpp"

#include <queue>

namespace urg {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double value = 0.0;
    Eigen::VectorXd x;
};

/// maximize c.x subject to rows A_i.x (sense_i) b_i, x >= 0, with sense in {'<', '=', '>'}.
inline LpResult simplex_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                            const std::string& sense, int max_iter = 200000, double tol = 1e-11) {
    const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols());
    require(static_cast<int>(b.size()) == m && static_cast<int>(c.size()) == n &&
                static_cast<int>(sense.size()) == m,
            ErrorKind::invalid_input, "simplex dimension mismatch");

    // columns: n structural, one slack per inequality, one artificial per row needing it
    std::vector<int> slack_col(m, -1), art_col(m, -1);
    int cols = n;
    for (int i = 0; i < m; ++i)
        if (sense[i] != '=') slack_col[i] = cols++;
    Eigen::MatrixXd rows(m, n);
    Eigen::VectorXd rhs(m);
    std::vector<double> slack_sign(m, 0.0);
    for (int i = 0; i < m; ++i) {
        double flip = b[i] < 0 ? -1.0 : 1.0;
        rows.row(i) = flip * A.row(i);
        rhs[i] = flip * b[i];
        if (sense[i] == '<') slack_sign[i] = flip;
        if (sense[i] == '>') slack_sign[i] = -flip;
    }
    for (int i = 0; i < m; ++i)
        if (slack_sign[i] <= 0) art_col[i] = cols++;
    const int W = cols + 1;  // last column is the right-hand side
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, W);
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        T.block(i, 0, 1, n) = rows.row(i);
        if (slack_col[i] >= 0) T(i, slack_col[i]) = slack_sign[i];
        if (art_col[i] >= 0) {
            T(i, art_col[i]) = 1.0;
            basis[i] = art_col[i];
        } else {
            basis[i] = slack_col[i];
        }
        T(i, W - 1) = rhs[i];
    }

    auto pivot = [&](int r, int col) {
        T.row(r) /= T(r, col);
        for (int i = 0; i <= m; ++i)
            if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
        basis[r] = col;
    };
    // Bland: lowest-index improving column, lowest-index basic variable among ratio ties
    auto run = [&](int usable_cols) -> LpStatus {
        for (int it = 0; it < max_iter; ++it) {
            int col = -1;
            for (int j = 0; j < usable_cols; ++j)
                if (T(m, j) < -tol) {
                    col = j;
                    break;
                }
            if (col < 0) return LpStatus::optimal;
            int r = -1;
            double best = kInf;
            for (int i = 0; i < m; ++i) {
                if (T(i, col) <= tol) continue;
                double ratio = T(i, W - 1) / T(i, col);
                if (r < 0 || ratio < best - tol || (std::abs(ratio - best) <= tol && basis[i] < basis[r])) {
                    best = ratio;
                    r = i;
                }
            }
            if (r < 0) return LpStatus::unbounded;
            pivot(r, col);
        }
        return LpStatus::iteration_limit;
    };

    LpResult res;
    int real_cols = n;
    for (int v : slack_col)
        if (v >= 0) real_cols = v + 1;
    // phase 1: minimize the sum of artificials
    bool has_art = false;
    for (int i = 0; i < m; ++i)
        if (art_col[i] >= 0) {
            has_art = true;
            T.row(m) -= T.row(i);
            T(m, art_col[i]) = 0.0;
        }
    if (has_art) {
        LpStatus s = run(cols);
        if (s == LpStatus::iteration_limit) return res.status = s, res;
        if (-T(m, W - 1) > 1e-9 * std::max(1.0, rhs.cwiseAbs().sum())) return res.status = LpStatus::infeasible, res;
        // drive artificials out of the basis where a real column allows it
        for (int i = 0; i < m; ++i) {
            if (basis[i] < real_cols) continue;
            for (int j = 0; j < real_cols; ++j)
                if (std::abs(T(i, j)) > tol) {
                    pivot(i, j);
                    break;
                }
        }
    }
    // phase 2 objective row
    T.row(m).setZero();
    for (int j = 0; j < n; ++j) T(m, j) = -c[j];
    for (int i = 0; i < m; ++i)
        if (basis[i] < n && T(m, basis[i]) != 0.0) T.row(m) -= T(m, basis[i]) * T.row(i);
    res.status = run(real_cols);
    res.x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) res.x[basis[i]] = T(i, W - 1);
    res.value = c.dot(res.x);
    return res;
}

/// Uncapacitated min-cost flow. Node supplies must sum to zero (out - in = supply).
class MinCostFlow {
public:
    explicit MinCostFlow(int nodes) : n_(nodes), head_(nodes, -1), supply_(nodes, 0.0) {}

    void add_arc(int u, int v, double cost) {
        require(cost >= 0, ErrorKind::invalid_input, "negative arc cost");
        arcs_.push_back({v, head_[u], cost, 0.0});
        head_[u] = static_cast<int>(arcs_.size()) - 1;
        arcs_.push_back({u, head_[v], -cost, 0.0});  // residual reverse, capacity = flow
        head_[v] = static_cast<int>(arcs_.size()) - 1;
    }

    void set_supply(int u, double s) { supply_[u] = s; }
    int rounds() const { return rounds_; }
    /// Node potentials after solve(); pot[v] - pot[u] <= cost on every arc u -> v.
    const std::vector<double>& potentials() const { return pot_; }

    /// Returns the optimal cost; throws numeric-failure if the demands cannot be routed.
    /// Primal-dual: Dijkstra on reduced costs fixes potentials, then blocking augmentation
    /// along zero reduced-cost arcs.
    double solve() {
        double scale = 0.0, cmax = 0.0;
        for (double s : supply_) scale += std::abs(s);
        if (scale == 0.0) return 0.0;
        for (std::size_t a = 0; a < arcs_.size(); a += 2) cmax = std::max(cmax, arcs_[a].cost);
        const double eps = 1e-13 * scale;
        const double ztol = 1e-12 * std::max(cmax, 1e-300);
        excess_ = supply_;
        std::vector<double>& pot = pot_;
        pot.assign(n_, 0.0);
        std::vector<double> dist(n_);
        std::vector<char> done(n_);
        using Item = std::pair<double, int>;
        for (rounds_ = 0; rounds_ < 4 * n_ + 100; ++rounds_) {
            std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
            std::fill(dist.begin(), dist.end(), kInf);
            std::fill(done.begin(), done.end(), 0);
            bool any = false;
            for (int u = 0; u < n_; ++u)
                if (excess_[u] > eps) {
                    dist[u] = 0.0;
                    pq.push({0.0, u});
                    any = true;
                }
            if (!any) break;
            double D = kInf;
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                if (done[u]) continue;
                done[u] = 1;
                if (excess_[u] < -eps) {
                    D = d;
                    break;
                }
                for (int a = head_[u]; a >= 0; a = arcs_[a].next) {
                    if (!open(a, eps)) continue;
                    int v = arcs_[a].to;
                    double rc = std::max(0.0, arcs_[a].cost + pot[u] - pot[v]);
                    if (d + rc < dist[v]) {
                        dist[v] = d + rc;
                        pq.push({dist[v], v});
                    }
                }
            }
            require(D < kInf, ErrorKind::numeric_failure, "min-cost flow: unreachable demand");
            for (int v = 0; v < n_; ++v) pot[v] += std::min(dist[v], D);
            // blocking flow on the admissible subgraph
            std::vector<int> cur(head_);
            std::vector<char> dead(n_, 0);
            for (int u = 0; u < n_; ++u) {
                while (excess_[u] > eps && !dead[u]) {
                    if (!augment_from(u, pot, cur, dead, eps, ztol)) dead[u] = 1;
                }
            }
        }
        for (int u = 0; u < n_; ++u)
            require(std::abs(excess_[u]) <= 1e-9 * scale, ErrorKind::numeric_failure, "min-cost flow did not converge");
        double cost = 0.0;
        for (std::size_t a = 0; a < arcs_.size(); a += 2) cost += arcs_[a].cost * arcs_[a].flow;
        return cost;
    }

private:
    struct Arc {
        int to, next;
        double cost, flow;
    };
    int n_;
    int rounds_ = 0;
    std::vector<int> head_;
    std::vector<double> supply_, excess_, pot_;
    std::vector<Arc> arcs_;

    bool open(int a, double eps) const { return (a % 2 == 0) || arcs_[a ^ 1].flow > eps * 1e-3; }
    double residual(int a) const { return a % 2 == 0 ? kInf : arcs_[a ^ 1].flow; }

    /// One augmenting path from s along admissible arcs (iterative DFS with current-arc pointers).
    bool augment_from(int s, const std::vector<double>& pot, std::vector<int>& cur, std::vector<char>& dead,
                      double eps, double ztol) {
        std::vector<int> path;  // arcs
        std::vector<char> on(n_, 0);
        int u = s;
        on[u] = 1;
        while (true) {
            if (u != s && excess_[u] < -eps) break;
            int& a = cur[u];
            while (a >= 0) {
                int v = arcs_[a].to;
                if (open(a, eps) && !dead[v] && !on[v] && arcs_[a].cost + pot[u] - pot[v] <= ztol) break;
                a = arcs_[a].next;
            }
            if (a < 0) {
                dead[u] = 1;
                on[u] = 0;
                if (path.empty()) return false;
                int back = path.back();
                path.pop_back();
                u = arcs_[back ^ 1].to;
                cur[u] = arcs_[cur[u]].next;
                continue;
            }
            path.push_back(a);
            u = arcs_[a].to;
            on[u] = 1;
        }
        double push = std::min(excess_[s], -excess_[u]);
        for (int a : path) push = std::min(push, residual(a));
        for (int a : path) {
            if (a % 2 == 0) arcs_[a].flow += push;
            else arcs_[a ^ 1].flow -= push;
        }
        excess_[s] -= push;
        excess_[u] += push;
        return true;
    }
};

} // namespace urg
