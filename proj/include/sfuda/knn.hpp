#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"

namespace sfuda {

struct Neighbor {
    int index = -1;
    double distance = 0.0;
};

/// Immutable kd-tree over a point set. Queries are exact; ties in distance
/// break toward the lower point index so results are reproducible.
class KnnIndex {
public:
    KnnIndex() = default;

    explicit KnnIndex(std::vector<Vec3> points) : points_(std::move(points)) { build(); }
    explicit KnnIndex(const PointCloud& cloud) : points_(cloud.points) { build(); }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// Exact k nearest neighbors of `query`, ascending by (distance, index).
    /// Returns min(k, size()) entries.
    std::vector<Neighbor> knn(const Vec3& query, int k) const {
        if (points_.empty()) throw EmptyCloud("knn: index over empty cloud");
        if (k < 1) throw EmptyInput("knn: k must be >= 1");
        const std::size_t want = std::min<std::size_t>(std::size_t(k), points_.size());

        // max-heap over (dist^2, index); lexicographic order realizes the
        // index tie-break.
        std::priority_queue<std::pair<double, int>> heap;
        knn_walk(0, query, want, heap);

        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = heap.size(); i-- > 0;) {
            out[i] = Neighbor{heap.top().second, std::sqrt(heap.top().first)};
            heap.pop();
        }
        return out;
    }

    /// All indices with distance <= radius, sorted ascending by index.
    std::vector<int> radius(const Vec3& query, double r) const {
        std::vector<int> out;
        if (points_.empty()) return out;
        radius_walk(0, query, r * r, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static constexpr int kLeafSize = 16;

    struct Node {
        int left = -1, right = -1;
        int begin = 0, end = 0;  // range into order_ (leaves only)
        int axis = 0;
        double split = 0.0;
    };

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;

    void build() {
        order_.resize(points_.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
        if (!points_.empty()) build_node(0, int(points_.size()));
    }

    int build_node(int begin, int end) {
        const int id = int(nodes_.size());
        nodes_.push_back(Node{});
        if (end - begin <= kLeafSize) {
            nodes_[id].begin = begin;
            nodes_[id].end = end;
            return id;
        }
        Vec3 lo = points_[order_[begin]], hi = lo;
        for (int i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) {
                             const double pa = points_[a][axis], pb = points_[b][axis];
                             return pa < pb || (pa == pb && a < b);
                         });
        nodes_[id].axis = axis;
        nodes_[id].split = points_[order_[mid]][axis];
        const int left = build_node(begin, mid);
        const int right = build_node(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void knn_walk(int id, const Vec3& q, std::size_t want,
                  std::priority_queue<std::pair<double, int>>& heap) const {
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                const double d2 = (points_[idx] - q).squaredNorm();
                const std::pair<double, int> cand{d2, idx};
                if (heap.size() < want) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        knn_walk(near, q, want, heap);
        // Descend on equality too: an equal-distance point with a lower
        // index may still displace the heap top.
        if (heap.size() < want || delta * delta <= heap.top().first) knn_walk(far, q, want, heap);
    }

    void radius_walk(int id, const Vec3& q, double r2, std::vector<int>& out) const {
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[i];
                if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        radius_walk(near, q, r2, out);
        if (delta * delta <= r2) radius_walk(far, q, r2, out);
    }
};

/// knn as a free operation mirroring the query contract.
inline std::vector<Neighbor> knn(const KnnIndex& index, const Vec3& query, int k) {
    return index.knn(query, k);
}

}  // namespace sfuda
