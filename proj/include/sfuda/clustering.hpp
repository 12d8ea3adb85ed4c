#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/knn.hpp"

namespace sfuda {

struct DbscanConfig {
    double epsilon = 0.5;  // meters; vehicle-scale default
    int min_points = 8;

    bool valid() const { return epsilon > 0.0 && min_points >= 1; }
};

/// Per-point cluster assignment. Cluster ids are contiguous 0..cluster_count-1;
/// points outside every cluster carry kNoise.
struct Clustering {
    static constexpr std::int32_t kNoise = -1;

    std::vector<std::int32_t> assignments;
    std::int32_t cluster_count = 0;

    bool is_noise(std::size_t i) const { return assignments[i] == kNoise; }

    std::vector<std::vector<int>> members() const {
        std::vector<std::vector<int>> out(cluster_count);
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] >= 0) out[assignments[i]].push_back(int(i));
        return out;
    }
};

/// DBSCAN with Euclidean eps-neighborhoods (inclusive of self). The scan
/// visits points in ascending index order and expands clusters breadth-first
/// with sorted neighbor lists, so border points join the first-discovered
/// adjacent core cluster and the partition is reproducible.
inline Clustering dbscan(const PointCloud& cloud, const DbscanConfig& cfg) {
    if (cloud.empty()) throw EmptyInput("dbscan: empty cloud");
    if (!cfg.valid()) throw ConfigError("dbscan: invalid config");

    const std::size_t n = cloud.size();
    constexpr std::int32_t kUnvisited = -2;
    Clustering result;
    result.assignments.assign(n, kUnvisited);

    KnnIndex index(cloud);
    std::int32_t next_cluster = 0;
    std::deque<int> queue;

    for (std::size_t i = 0; i < n; ++i) {
        if (result.assignments[i] != kUnvisited) continue;
        const std::vector<int> neigh = index.radius(cloud.points[i], cfg.epsilon);
        if (int(neigh.size()) < cfg.min_points) {
            result.assignments[i] = Clustering::kNoise;
            continue;
        }
        const std::int32_t cid = next_cluster++;
        result.assignments[i] = cid;
        queue.clear();
        for (int j : neigh) {
            if (j == int(i)) continue;
            if (result.assignments[j] == kUnvisited) {
                result.assignments[j] = cid;
                queue.push_back(j);
            } else if (result.assignments[j] == Clustering::kNoise) {
                result.assignments[j] = cid;  // border point
            }
        }
        while (!queue.empty()) {
            const int q = queue.front();
            queue.pop_front();
            const std::vector<int> qn = index.radius(cloud.points[q], cfg.epsilon);
            if (int(qn.size()) < cfg.min_points) continue;  // border, do not expand
            for (int j : qn) {
                if (result.assignments[j] == kUnvisited) {
                    result.assignments[j] = cid;
                    queue.push_back(j);
                } else if (result.assignments[j] == Clustering::kNoise) {
                    result.assignments[j] = cid;
                }
            }
        }
    }
    result.cluster_count = next_cluster;
    return result;
}

}  // namespace sfuda
