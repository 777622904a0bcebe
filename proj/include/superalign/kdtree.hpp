#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "superalign/geometry.hpp"

namespace superalign {

/// KD-tree over a point cloud. Queries return exactly what a brute-force scan
/// returns, with distance ties broken by ascending point index.
class KdTree {
public:
    KdTree() = default;

    explicit KdTree(const PointCloud& cloud) : points_(cloud.points) {
        if (points_.empty()) return;
        std::vector<int> order(points_.size());
        std::iota(order.begin(), order.end(), 0);
        nodes_.reserve(points_.size());
        root_ = build(order, 0, static_cast<int>(order.size()), 0);
    }

    std::size_t size() const { return points_.size(); }
    const Vec3& point(int i) const { return points_[static_cast<std::size_t>(i)]; }

    /// k nearest neighbors, ascending by (distance, index). k larger than the
    /// point count returns all points.
    std::vector<std::pair<int, double>> knn(const Vec3& query, std::size_t k) const {
        if (k < 1) fail(ErrorCode::Parameter, "knn requires k >= 1");
        if (points_.empty()) fail(ErrorCode::EmptyInput, "knn on empty index");
        k = std::min(k, points_.size());

        // best-first candidate set ordered by (dist^2, index), worst at front
        std::vector<std::pair<double, int>> heap;
        heap.reserve(k + 1);
        knn_recurse(root_, query, k, heap);
        std::sort_heap(heap.begin(), heap.end());
        std::vector<std::pair<int, double>> out;
        out.reserve(heap.size());
        for (const auto& [d2, idx] : heap) out.emplace_back(idx, std::sqrt(d2));
        return out;
    }

    /// Indices of all points with distance <= radius, ascending by index.
    std::vector<int> radius_search(const Vec3& query, double radius) const {
        if (radius <= 0.0) fail(ErrorCode::Parameter, "radius must be positive");
        std::vector<int> out;
        radius_recurse(root_, query, radius * radius, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::pair<int, double> nearest(const Vec3& query) const {
        auto r = knn(query, 1);
        return {r[0].first, r[0].second};
    }

private:
    struct Node {
        int index = -1;   // point stored at this node
        int axis = 0;
        int left = -1;
        int right = -1;
    };

    int build(std::vector<int>& order, int lo, int hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const int mid = lo + (hi - lo) / 2;
        std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                         [&](int a, int b) {
                             const double pa = points_[static_cast<std::size_t>(a)][axis];
                             const double pb = points_[static_cast<std::size_t>(b)][axis];
                             return pa < pb || (pa == pb && a < b);
                         });
        Node node;
        node.index = order[static_cast<std::size_t>(mid)];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(order, lo, mid, depth + 1);
        const int right = build(order, mid + 1, hi, depth + 1);
        nodes_[static_cast<std::size_t>(self)].left = left;
        nodes_[static_cast<std::size_t>(self)].right = right;
        return self;
    }

    void knn_recurse(int node_id, const Vec3& q, std::size_t k,
                     std::vector<std::pair<double, int>>& heap) const {
        if (node_id < 0) return;
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        const Vec3& p = points_[static_cast<std::size_t>(node.index)];
        const double d2 = (p - q).squaredNorm();

        const std::pair<double, int> cand{d2, node.index};
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }

        const double delta = q[node.axis] - p[node.axis];
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        knn_recurse(near, q, k, heap);
        // the far side can still hold a tie, so recurse on <= as well
        if (heap.size() < k || delta * delta <= heap.front().first) {
            knn_recurse(far, q, k, heap);
        }
    }

    void radius_recurse(int node_id, const Vec3& q, double r2, std::vector<int>& out) const {
        if (node_id < 0) return;
        const Node& node = nodes_[static_cast<std::size_t>(node_id)];
        const Vec3& p = points_[static_cast<std::size_t>(node.index)];
        if ((p - q).squaredNorm() <= r2) out.push_back(node.index);
        const double delta = q[node.axis] - p[node.axis];
        if (delta <= 0.0 || delta * delta <= r2) radius_recurse(node.left, q, r2, out);
        if (delta >= 0.0 || delta * delta <= r2) radius_recurse(node.right, q, r2, out);
    }

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace superalign
