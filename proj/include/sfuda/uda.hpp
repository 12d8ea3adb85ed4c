#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sfuda/clustering.hpp"
#include "sfuda/errors.hpp"
#include "sfuda/estimator.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/pseudo_label.hpp"
#include "sfuda/random.hpp"

namespace sfuda {

struct EmaConfig {
    double alpha = 0.999;

    bool valid() const { return alpha >= 0.0 && alpha <= 1.0; }
};

/// Exponential moving average of the student into the teacher:
/// theta' = alpha * theta_teach + (1 - alpha) * theta_stu, entrywise.
inline EstimatorParams ema_update(const EstimatorParams& teacher, const EstimatorParams& student,
                                  const EmaConfig& cfg) {
    if (!cfg.valid()) throw ConfigError("ema_update: alpha outside [0,1]");
    if (!teacher.shape_compatible(student)) throw ShapeMismatch("ema_update: parameter shapes differ");
    EstimatorParams out = teacher;
    out.embedding = cfg.alpha * teacher.embedding + (1.0 - cfg.alpha) * student.embedding;
    out.log_temperature = cfg.alpha * teacher.log_temperature + (1.0 - cfg.alpha) * student.log_temperature;
    return out;
}

/// Transformation applied to the first frame only; the second frame passes
/// through untouched. The only kind is a rotation about the up axis.
struct AsymTransform {
    double angle = 0.0;  // radians

    RigidMotion motion() const { return rotation_about_up(angle); }
};

struct FramePair {
    PointCloud first;
    PointCloud second;
};

inline FramePair asymmetric_transform(const PointCloud& first, const PointCloud& second,
                                      const AsymTransform& t) {
    return FramePair{apply_motion(first, t.motion()), second};
}

/// Full pseudo-label pipeline for one target pair: warp the first frame by
/// the teacher flow, rigidify per cluster, then refine correspondences.
inline PseudoLabels epc_loss_targets(const PointCloud& first, const FlowField& teacher_flow,
                                     const Clustering& clusters, const PointCloud& second,
                                     const CrConfig& cr_cfg) {
    const WarpedCloud warped = warp(first, teacher_flow);
    const DrResult dr = deformation_regularize(first, warped, clusters);
    return correspondence_refine(dr, clusters, second, cr_cfg);
}

enum class TransformMode {
    Asymmetric,  // rotate the first target frame only
    Symmetric,   // ablation: rotate both target frames
};

enum class PseudoFrame {
    Reconciled,  // rotate pseudo-labels into the student's view (default)
    Literal,     // compare against unrotated pseudo-labels as written
};

struct AdaptConfig {
    EmaConfig ema;
    CrConfig cr;
    DbscanConfig dbscan;
    SgdConfig sgd;
    double rotation_range = 15.0 * M_PI / 180.0;  // radians, uniform in [-range, range]
    TransformMode transform_mode = TransformMode::Asymmetric;
    PseudoFrame pseudo_frame = PseudoFrame::Reconciled;
};

struct SourceBatch {
    const PointCloud& first;
    const PointCloud& second;
    const FlowField& gt_flow;
};

struct TargetBatch {
    const PointCloud& first;
    const PointCloud& second;
};

struct TrainState {
    EstimatorParams student;
    EstimatorParams teacher;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    double total_source_loss = 0.0;
    double total_epc_loss = 0.0;
};

struct StepStats {
    double l_source = 0.0;
    double l_epc = 0.0;
    double l_stu = 0.0;
    double angle = 0.0;
    int degenerate_clusters = 0;
};

/// Source-supervised step: L1 between predicted and ground-truth endpoints.
inline StepStats pretrain_step(TrainState& state, const SourceBatch& batch, const SgdConfig& sgd) {
    std::vector<Vec3> targets(batch.first.size());
    for (std::size_t i = 0; i < batch.first.size(); ++i)
        targets[i] = batch.first.points[i] + batch.gt_flow.vectors[i];
    const LossResult source = loss_and_gradients(state.student, batch.first, batch.second, targets);
    sgd_step(state.student, source.grads, sgd);
    state.step += 1;
    state.total_source_loss += source.loss;
    StepStats stats;
    stats.l_source = source.loss;
    stats.l_stu = source.loss;
    return stats;
}

/// One mean-teacher adaptation step:
///   a) student supervised loss on the source pair;
///   b) teacher forward on the untransformed target pair, pseudo-labels via
///      deformation regularization and correspondence refinement;
///   c) seeded rotation about the up axis, student forward on the transformed
///      target pair, endpoint-consistency loss against the pseudo-labels
///      (rotated into the student's view unless Literal mode is selected);
///   d) one SGD step on the summed loss;
///   e) EMA update of the teacher. Gradients never reach the teacher.
inline StepStats adapt_step(TrainState& state, const SourceBatch& source, const TargetBatch& target,
                            const AdaptConfig& cfg) {
    // All per-step randomness comes from one stream derived from (seed, step).
    Rng rng = make_rng(state.seed, state.step, /*tag=*/0x41445054);
    AsymTransform transform{uniform_real(rng, -cfg.rotation_range, cfg.rotation_range)};

    // (a) source supervision
    std::vector<Vec3> source_targets(source.first.size());
    for (std::size_t i = 0; i < source.first.size(); ++i)
        source_targets[i] = source.first.points[i] + source.gt_flow.vectors[i];
    const LossResult l_source =
        loss_and_gradients(state.student, source.first, source.second, source_targets);

    // (b) teacher pseudo-labels on the raw target pair
    const FlowField teacher_flow = predict_flow(state.teacher, target.first, target.second);
    const Clustering clusters = dbscan(target.first, cfg.dbscan);
    const WarpedCloud warped = warp(target.first, teacher_flow);
    const DrResult dr = deformation_regularize(target.first, warped, clusters);
    const PseudoLabels pseudo = correspondence_refine(dr, clusters, target.second, cfg.cr);

    // (c) student consistency on the transformed target pair
    const RigidMotion rot = transform.motion();
    PointCloud student_first = apply_motion(target.first, rot);
    const PointCloud* student_second = &target.second;
    PointCloud second_rotated;
    if (cfg.transform_mode == TransformMode::Symmetric) {
        second_rotated = apply_motion(target.second, rot);
        student_second = &second_rotated;
    }
    std::vector<Vec3> epc_targets = pseudo.points;
    const bool rotate_targets =
        cfg.transform_mode == TransformMode::Symmetric || cfg.pseudo_frame == PseudoFrame::Reconciled;
    if (rotate_targets)
        for (Vec3& p : epc_targets) p = rot.apply(p);
    const LossResult l_epc =
        loss_and_gradients(state.student, student_first, *student_second, epc_targets);

    // (d) single SGD step on L_source + L_EPC
    Gradients total = l_source.grads;
    total.d_embedding += l_epc.grads.d_embedding;
    total.d_log_temperature += l_epc.grads.d_log_temperature;
    sgd_step(state.student, total, cfg.sgd);

    // (e) EMA teacher update
    state.teacher = ema_update(state.teacher, state.student, cfg.ema);

    state.step += 1;
    state.total_source_loss += l_source.loss;
    state.total_epc_loss += l_epc.loss;

    StepStats stats;
    stats.l_source = l_source.loss;
    stats.l_epc = l_epc.loss;
    stats.l_stu = l_source.loss + l_epc.loss;
    stats.angle = transform.angle;
    stats.degenerate_clusters = dr.degenerate_clusters;
    return stats;
}

}  // namespace sfuda
