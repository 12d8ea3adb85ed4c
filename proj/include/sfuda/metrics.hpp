#pragma once

#include <cstddef>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"

namespace sfuda {

/// Scene flow accuracy summary. Percentages are in [0, 100].
struct FlowMetrics {
    double epe3d = 0.0;       // mean endpoint error, meters
    double acc_strict = 0.0;  // % with EPE < 0.05 m or relative error < 5%
    double acc_relax = 0.0;   // % with EPE < 0.1 m or relative error < 10%
    double outliers = 0.0;    // % with EPE > 0.3 m or relative error > 10%
    std::size_t point_count = 0;
};

// Relative error denominator guard. Ground-truth flow is exactly zero on
// static points after ego compensation; the guard makes the relative error
// huge for any nonzero prediction there, which is what the metric intends.
inline constexpr double kRelativeErrorGuard = 1e-9;

inline FlowMetrics evaluate(const FlowField& pred, const FlowField& gt) {
    if (pred.size() != gt.size()) throw LengthMismatch("evaluate: flow length mismatch");
    if (pred.size() == 0) throw EmptyInput("evaluate: empty flow fields");

    const std::size_t n = pred.size();
    double epe_sum = 0.0;
    std::size_t n_strict = 0, n_relax = 0, n_out = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = (pred.vectors[i] - gt.vectors[i]).norm();
        const double gt_norm = gt.vectors[i].norm();
        const double r = e / std::max(gt_norm, kRelativeErrorGuard);
        epe_sum += e;
        if (e < 0.05 || r < 0.05) ++n_strict;
        if (e < 0.1 || r < 0.1) ++n_relax;
        if (e > 0.3 || r > 0.1) ++n_out;
    }
    FlowMetrics m;
    m.epe3d = epe_sum / double(n);
    m.acc_strict = 100.0 * double(n_strict) / double(n);
    m.acc_relax = 100.0 * double(n_relax) / double(n);
    m.outliers = 100.0 * double(n_out) / double(n);
    m.point_count = n;
    return m;
}

enum class MetricAveraging { PerPair, Pooled };

/// Dataset-level aggregate: per-pair averaging by default, point-pooled
/// when requested. Reports should label which mode produced them.
inline FlowMetrics aggregate(const std::vector<FlowMetrics>& per_pair, MetricAveraging mode) {
    if (per_pair.empty()) throw EmptyInput("aggregate: no metrics");
    FlowMetrics out;
    double weight_sum = 0.0;
    for (const FlowMetrics& m : per_pair) {
        const double w = mode == MetricAveraging::PerPair ? 1.0 : double(m.point_count);
        out.epe3d += w * m.epe3d;
        out.acc_strict += w * m.acc_strict;
        out.acc_relax += w * m.acc_relax;
        out.outliers += w * m.outliers;
        out.point_count += m.point_count;
        weight_sum += w;
    }
    out.epe3d /= weight_sum;
    out.acc_strict /= weight_sum;
    out.acc_relax /= weight_sum;
    out.outliers /= weight_sum;
    return out;
}

}  // namespace sfuda
