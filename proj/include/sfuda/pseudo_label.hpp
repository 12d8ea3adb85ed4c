#pragma once

#include <vector>

#include "sfuda/clustering.hpp"
#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/knn.hpp"

namespace sfuda {

/// First frame displaced by a flow field, index-aligned with that frame.
struct WarpedCloud {
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }
};

inline WarpedCloud warp(const PointCloud& first, const FlowField& flow) {
    if (flow.size() != first.size()) throw LengthMismatch("warp: flow not aligned with cloud");
    WarpedCloud out;
    out.points.resize(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) out.points[i] = first.points[i] + flow.vectors[i];
    return out;
}

struct CrConfig {
    int k_neighbors = 6;

    bool valid() const { return k_neighbors >= 1; }
};

struct DrResult {
    WarpedCloud reconstructed;
    std::vector<RigidMotion> motions;  // one per cluster id
    int degenerate_clusters = 0;       // identity fallback tally
};

/// Refined warped cloud plus the per-cluster corrections that produced it.
/// Within each cluster the points are an exact rigid transform of the
/// first-frame cluster followed by one shared translation.
struct PseudoLabels {
    std::vector<Vec3> points;
    std::vector<RigidMotion> motions;
    std::vector<Vec3> refinement_deltas;  // per cluster
};

/// Replace each cluster of the warp with its best-fit rigid transform of the
/// first-frame cluster. Noise points keep the raw warp; clusters whose fit is
/// degenerate (under 3 points, collinear) get the identity motion, i.e. their
/// reconstruction is the first-frame position itself, so an unidentifiable
/// rotation never injects motion into the training targets.
inline DrResult deformation_regularize(const PointCloud& first_frame, const WarpedCloud& warped,
                                       const Clustering& clusters) {
    if (warped.size() != first_frame.size())
        throw LengthMismatch("deformation_regularize: warp not aligned with first frame");
    if (clusters.assignments.size() != first_frame.size())
        throw LengthMismatch("deformation_regularize: clustering not aligned with first frame");

    DrResult result;
    result.reconstructed = warped;
    result.motions.assign(std::size_t(clusters.cluster_count), RigidMotion::identity());

    const std::vector<std::vector<int>> members = clusters.members();
    for (std::int32_t l = 0; l < clusters.cluster_count; ++l) {
        const std::vector<int>& idx = members[l];
        std::vector<Vec3> src, dst;
        src.reserve(idx.size());
        dst.reserve(idx.size());
        for (int i : idx) {
            src.push_back(first_frame.points[i]);
            dst.push_back(warped.points[i]);
        }
        RigidMotion motion;
        bool degenerate = false;
        try {
            motion = kabsch_fit(src, dst);
        } catch (const DegenerateCluster&) {
            motion = RigidMotion::identity();
            degenerate = true;
            ++result.degenerate_clusters;
        }
        result.motions[l] = motion;
        if (degenerate) {
            for (int i : idx) result.reconstructed.points[i] = first_frame.points[i];
        } else {
            for (int i : idx) result.reconstructed.points[i] = motion.apply(first_frame.points[i]);
        }
    }
    return result;
}

/// Mean offset from point j to its K nearest neighbors within the warp,
/// excluding the point itself.
inline Vec3 laplacian_coordinate_self(const WarpedCloud& warped, const KnnIndex& warp_index,
                                      std::size_t j, int k) {
    if (k < 1) throw EmptyInput("laplacian_coordinate_self: K must be >= 1");
    if (warped.size() < 2) throw EmptyNeighborhood("laplacian_coordinate_self: fewer than 2 points");
    const Vec3& p = warped.points[j];
    const std::vector<Neighbor> neigh = warp_index.knn(p, k + 1);
    Vec3 sum = Vec3::Zero();
    int count = 0;
    for (const Neighbor& nb : neigh) {
        if (nb.index == int(j)) continue;
        if (count == k) break;
        sum += warp_index.points()[nb.index] - p;
        ++count;
    }
    return sum / double(count);
}

/// Mean offset from a warp point to its K nearest neighbors in the second
/// frame. The query point is not a member of the second frame, so no
/// self-exclusion applies.
inline Vec3 laplacian_coordinate_cross(const Vec3& p, const KnnIndex& second_index, int k) {
    if (k < 1) throw EmptyInput("laplacian_coordinate_cross: K must be >= 1");
    const std::vector<Neighbor> neigh = second_index.knn(p, k);
    Vec3 sum = Vec3::Zero();
    for (const Neighbor& nb : neigh) sum += second_index.points()[nb.index] - p;
    return sum / double(neigh.size());
}

/// Shift each reconstructed cluster by the mean gap between its cross-frame
/// and within-warp Laplacian coordinates. One shared correction per cluster
/// keeps the rigid shape; noise points pass through untouched.
inline PseudoLabels correspondence_refine(const DrResult& dr, const Clustering& clusters,
                                          const PointCloud& second_frame, const CrConfig& cfg) {
    if (!cfg.valid()) throw ConfigError("correspondence_refine: invalid config");
    if (second_frame.empty()) throw EmptyInput("correspondence_refine: empty second frame");
    if (clusters.assignments.size() != dr.reconstructed.size())
        throw LengthMismatch("correspondence_refine: clustering not aligned with warp");

    PseudoLabels out;
    out.points = dr.reconstructed.points;
    out.motions = dr.motions;
    out.refinement_deltas.assign(std::size_t(clusters.cluster_count), Vec3::Zero());
    if (clusters.cluster_count == 0) return out;

    const KnnIndex warp_index(dr.reconstructed.points);
    const KnnIndex second_index(second_frame);
    const bool self_defined = dr.reconstructed.size() >= 2;

    const std::vector<std::vector<int>> members = clusters.members();
    for (std::int32_t l = 0; l < clusters.cluster_count; ++l) {
        const std::vector<int>& idx = members[l];
        if (idx.empty()) continue;
        Vec3 delta = Vec3::Zero();
        for (int i : idx) {
            const Vec3 l2 = laplacian_coordinate_cross(dr.reconstructed.points[i], second_index,
                                                       cfg.k_neighbors);
            const Vec3 l1 = self_defined
                                ? laplacian_coordinate_self(dr.reconstructed, warp_index,
                                                            std::size_t(i), cfg.k_neighbors)
                                : Vec3::Zero();
            delta += l2 - l1;
        }
        delta /= double(idx.size());
        out.refinement_deltas[l] = delta;
        for (int i : idx) out.points[i] += delta;
    }
    return out;
}

}  // namespace sfuda
