#pragma once

// Static 2D kd-tree over a fixed point set: nearest neighbour, k-nearest,
// radius queries, and per-node mass aggregates for far-field summation.

#include "urg/core.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace urg {

class KdTree {
public:
    struct Node {
        int begin = 0, end = 0;     // range into order_
        int left = -1, right = -1;  // children, -1 for leaves
        Vec2 lo{kInf, kInf}, hi{-kInf, -kInf};
        double mass = 0.0;
        Vec2 centroid = Vec2::Zero();
        double radius = 0.0;        // max distance from centroid to a member
    };

    KdTree() = default;

    explicit KdTree(const std::vector<Vec2>& pts, const std::vector<double>* weights = nullptr,
                    int leaf_size = 8)
        : pts_(pts), leaf_(leaf_size) {
        order_.resize(pts_.size());
        std::iota(order_.begin(), order_.end(), 0);
        if (weights) w_ = *weights;
        else w_.assign(pts_.size(), 1.0);
        if (!pts_.empty()) build(0, static_cast<int>(pts_.size()), 0);
    }

    bool empty() const { return pts_.empty(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& order() const { return order_; }
    const std::vector<Vec2>& points() const { return pts_; }
    const std::vector<double>& weights() const { return w_; }

    /// Nearest point index; ties resolved towards the lowest index.
    std::pair<int, double> nearest(const Vec2& q) const {
        int best = -1;
        double bd2 = kInf;
        if (!nodes_.empty()) nearest_rec(0, q, best, bd2);
        return {best, std::sqrt(bd2)};
    }

    /// Indices within distance r (closed ball), sorted ascending.
    std::vector<int> radius(const Vec2& q, double r) const {
        std::vector<int> out;
        if (!nodes_.empty()) radius_rec(0, q, r * r, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// k nearest indices ordered by (distance, index).
    std::vector<int> knn(const Vec2& q, int k) const {
        using Item = std::pair<double, int>;
        std::priority_queue<Item> heap;
        if (!nodes_.empty() && k > 0) knn_rec(0, q, k, heap);
        std::vector<Item> items;
        while (!heap.empty()) {
            items.push_back(heap.top());
            heap.pop();
        }
        std::sort(items.begin(), items.end());
        std::vector<int> out;
        for (auto& it : items) out.push_back(it.second);
        return out;
    }

    static double box_dist2(const Node& n, const Vec2& q) {
        double dx = std::max({n.lo.x() - q.x(), 0.0, q.x() - n.hi.x()});
        double dy = std::max({n.lo.y() - q.y(), 0.0, q.y() - n.hi.y()});
        return dx * dx + dy * dy;
    }

private:
    std::vector<Vec2> pts_;
    std::vector<double> w_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int leaf_ = 8;

    int build(int b, int e, int depth) {
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Node n;
        n.begin = b;
        n.end = e;
        double m = 0.0;
        Vec2 c = Vec2::Zero();
        for (int i = b; i < e; ++i) {
            const Vec2& p = pts_[order_[i]];
            n.lo = n.lo.cwiseMin(p);
            n.hi = n.hi.cwiseMax(p);
            double w = w_[order_[i]];
            m += w;
            c += w * p;
        }
        n.mass = m;
        n.centroid = m > 0 ? Vec2(c / m) : Vec2(0.5 * (n.lo + n.hi));
        for (int i = b; i < e; ++i)
            n.radius = std::max(n.radius, (pts_[order_[i]] - n.centroid).norm());
        if (e - b > leaf_) {
            int axis = (n.hi.x() - n.lo.x() >= n.hi.y() - n.lo.y()) ? 0 : 1;
            int mid = (b + e) / 2;
            std::nth_element(order_.begin() + b, order_.begin() + mid, order_.begin() + e, [&](int i, int j) {
                double a = pts_[i][axis], bb = pts_[j][axis];
                return a < bb || (a == bb && i < j);
            });
            n.left = build(b, mid, depth + 1);
            n.right = build(mid, e, depth + 1);
        }
        nodes_[id] = n;
        return id;
    }

    void nearest_rec(int id, const Vec2& q, int& best, double& bd2) const {
        const Node& n = nodes_[id];
        if (box_dist2(n, q) > bd2) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                int k = order_[i];
                double d2 = (pts_[k] - q).squaredNorm();
                if (d2 < bd2 || (d2 == bd2 && k < best)) {
                    bd2 = d2;
                    best = k;
                }
            }
            return;
        }
        int a = n.left, b = n.right;
        if (box_dist2(nodes_[b], q) < box_dist2(nodes_[a], q)) std::swap(a, b);
        nearest_rec(a, q, best, bd2);
        nearest_rec(b, q, best, bd2);
    }

    void radius_rec(int id, const Vec2& q, double r2, std::vector<int>& out) const {
        const Node& n = nodes_[id];
        if (box_dist2(n, q) > r2) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                int k = order_[i];
                if ((pts_[k] - q).squaredNorm() <= r2) out.push_back(k);
            }
            return;
        }
        radius_rec(n.left, q, r2, out);
        radius_rec(n.right, q, r2, out);
    }

    void knn_rec(int id, const Vec2& q, int k, std::priority_queue<std::pair<double, int>>& heap) const {
        const Node& n = nodes_[id];
        if (static_cast<int>(heap.size()) == k && box_dist2(n, q) > heap.top().first) return;
        if (n.left < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                int j = order_[i];
                std::pair<double, int> item{(pts_[j] - q).squaredNorm(), j};
                if (static_cast<int>(heap.size()) < k) heap.push(item);
                else if (item < heap.top()) {
                    heap.pop();
                    heap.push(item);
                }
            }
            return;
        }
        int a = n.left, b = n.right;
        if (box_dist2(nodes_[b], q) < box_dist2(nodes_[a], q)) std::swap(a, b);
        knn_rec(a, q, k, heap);
        knn_rec(b, q, k, heap);
    }
};

} // namespace urg
