#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "sfuda/errors.hpp"

namespace sfuda {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered 3D point set in meters with optional per-point entity labels.
/// Labels are either empty (no labels) or exactly one per point.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<std::uint32_t> labels;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_labels() const { return !labels.empty(); }

    bool valid() const {
        if (has_labels() && labels.size() != points.size()) return false;
        for (const Vec3& p : points)
            if (!p.allFinite()) return false;
        return true;
    }
};

/// Per-point displacement field, index-aligned with a specific PointCloud.
struct FlowField {
    std::vector<Vec3> vectors;

    std::size_t size() const { return vectors.size(); }

    bool valid_for(std::size_t cloud_size) const {
        if (vectors.size() != cloud_size) return false;
        for (const Vec3& v : vectors)
            if (!v.allFinite()) return false;
        return true;
    }
};

/// Rigid transform acting on row vectors: p' = p * R + t.
/// The row convention follows the cluster reconstruction and entity motion
/// formulas used throughout; composing or inverting through the members
/// below keeps the convention in one place.
struct RigidMotion {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation.transpose() * p + translation; }

    // this followed by next: p * R1 * R2 + (t1 * R2 + t2)
    RigidMotion then(const RigidMotion& next) const {
        RigidMotion out;
        out.rotation = rotation * next.rotation;
        out.translation = next.rotation.transpose() * translation + next.translation;
        return out;
    }

    RigidMotion inverse() const {
        RigidMotion out;
        out.rotation = rotation.transpose();
        out.translation = -(rotation * translation);
        return out;
    }

    bool valid(double tol = 1e-9) const {
        if (!rotation.allFinite() || !translation.allFinite()) return false;
        if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
        return std::abs(rotation.determinant() - 1.0) <= tol;
    }

    static RigidMotion identity() { return RigidMotion{}; }
};

/// Rotation by `angle` about the up axis (+z) through the origin,
/// counterclockwise for row vectors.
inline RigidMotion rotation_about_up(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    RigidMotion m;
    m.rotation << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
    return m;
}

inline PointCloud apply_motion(const PointCloud& cloud, const RigidMotion& m) {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(m.apply(p));
    out.labels = cloud.labels;
    return out;
}

/// Least-squares rigid fit between corresponded point sets, minimizing
/// sum over i of |s_i * R + t - t_i|^2. Reflections are corrected by
/// flipping the smallest singular direction so det(R) = +1.
///
/// Throws DegenerateCluster when n < 3 or the source points are
/// collinear/coincident within 1e-12 (rotation not identifiable).
inline RigidMotion kabsch_fit(std::span<const Vec3> source, std::span<const Vec3> target) {
    if (source.size() != target.size()) throw LengthMismatch("kabsch_fit: size mismatch");
    const std::size_t n = source.size();
    if (n < 3) throw DegenerateCluster("kabsch_fit: fewer than 3 points");

    Vec3 cs = Vec3::Zero(), ct = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        cs += source[i];
        ct += target[i];
    }
    cs /= double(n);
    ct /= double(n);

    // H = X^T Y with X, Y the centered sets as n x 3 row matrices.
    Mat3 h = Mat3::Zero();
    Mat3 cov_s = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = source[i] - cs;
        const Vec3 y = target[i] - ct;
        h += x * y.transpose();
        cov_s += x * x.transpose();
    }

    // Rotation about a line is unidentifiable: demand 2D spread in source.
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov_s);
    const Vec3 ev = es.eigenvalues();  // ascending
    const double spread_max = std::sqrt(std::max(ev[2], 0.0) / double(n));
    const double spread_mid = std::sqrt(std::max(ev[1], 0.0) / double(n));
    if (spread_mid <= 1e-12 * std::max(1.0, spread_max))
        throw DegenerateCluster("kabsch_fit: collinear or coincident source points");

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    const double d = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RigidMotion out;
    out.rotation = u * Eigen::DiagonalMatrix<double, 3>(1.0, 1.0, d) * v.transpose();
    out.translation = ct - out.rotation.transpose() * cs;  // t = ct - cs * R
    return out;
}

inline RigidMotion kabsch_fit(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
    return kabsch_fit(std::span<const Vec3>(source), std::span<const Vec3>(target));
}

}  // namespace sfuda
