#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/knn.hpp"

namespace sfuda {

using EmbeddingMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Soft-correspondence flow estimator: for each first-frame point, candidate
/// matches are its Euclidean nearest neighbors in the second frame, weighted
/// by a softmax over squared distances in a learned linear embedding of the
/// offset. The embedding (3 x d) and log-temperature are the learnable
/// parameters; candidate_k is a fixed hyperparameter.
struct EstimatorParams {
    EmbeddingMatrix embedding;
    double log_temperature = 0.0;
    int candidate_k = 16;

    double temperature() const { return std::exp(log_temperature); }
    int dim() const { return int(embedding.cols()); }

    bool shape_compatible(const EstimatorParams& other) const {
        return embedding.rows() == other.embedding.rows() &&
               embedding.cols() == other.embedding.cols() && candidate_k == other.candidate_k;
    }

    bool all_finite() const {
        return embedding.allFinite() && std::isfinite(log_temperature);
    }

    /// Identity-padded init: embedding rows are a scaled 3x3 identity
    /// followed by zeros, so the untrained model scores candidates by
    /// (scaled) Euclidean distance.
    static EstimatorParams make(int dim = 8, int candidate_k = 16, double tau_init = 1.0,
                                double embed_scale = 1.0) {
        if (dim < 3) throw ConfigError("EstimatorParams: embedding width must be >= 3");
        if (candidate_k < 1) throw ConfigError("EstimatorParams: candidate_k must be >= 1");
        EstimatorParams p;
        p.embedding = EmbeddingMatrix::Zero(3, dim);
        for (int r = 0; r < 3; ++r) p.embedding(r, r) = embed_scale;
        p.log_temperature = std::log(tau_init);
        p.candidate_k = candidate_k;
        return p;
    }
};

struct Gradients {
    EmbeddingMatrix d_embedding;
    double d_log_temperature = 0.0;

    static Gradients zero_like(const EstimatorParams& p) {
        Gradients g;
        g.d_embedding = EmbeddingMatrix::Zero(3, p.dim());
        return g;
    }

    double norm() const {
        return std::sqrt(d_embedding.squaredNorm() + d_log_temperature * d_log_temperature);
    }

    bool all_finite() const {
        return d_embedding.allFinite() && std::isfinite(d_log_temperature);
    }
};

namespace detail {

// Per-point forward pass state kept for the backward pass.
struct SoftMatch {
    std::vector<int> candidates;        // indices into second frame
    std::vector<double> weights;        // softmax weights
    std::vector<double> embed_sqnorms;  // |(p - q_j) * E|^2
    Vec3 flow = Vec3::Zero();
};

inline SoftMatch soft_match(const EstimatorParams& params, const Vec3& p, const KnnIndex& second) {
    const double tau = params.temperature();
    const std::vector<Neighbor> neigh = second.knn(p, params.candidate_k);
    SoftMatch m;
    m.candidates.reserve(neigh.size());
    m.weights.resize(neigh.size());
    m.embed_sqnorms.resize(neigh.size());

    double max_score = -std::numeric_limits<double>::infinity();
    std::vector<double> scores(neigh.size());
    for (std::size_t j = 0; j < neigh.size(); ++j) {
        const Vec3& q = second.points()[neigh[j].index];
        m.candidates.push_back(neigh[j].index);
        const Eigen::VectorXd u = params.embedding.transpose() * (p - q);  // (p - q) * E
        m.embed_sqnorms[j] = u.squaredNorm();
        scores[j] = -m.embed_sqnorms[j] / tau;
        max_score = std::max(max_score, scores[j]);
    }
    double norm = 0.0;
    for (std::size_t j = 0; j < neigh.size(); ++j) {
        m.weights[j] = std::exp(scores[j] - max_score);
        norm += m.weights[j];
    }
    for (std::size_t j = 0; j < neigh.size(); ++j) {
        m.weights[j] /= norm;
        m.flow += m.weights[j] * (second.points()[m.candidates[j]] - p);
    }
    return m;
}

}  // namespace detail

inline FlowField predict_flow(const EstimatorParams& params, const PointCloud& first,
                              const PointCloud& second) {
    if (first.empty() || second.empty()) throw EmptyCloud("predict_flow: empty frame");
    const KnnIndex index(second);
    FlowField out;
    out.vectors.reserve(first.size());
    for (const Vec3& p : first.points) out.vectors.push_back(detail::soft_match(params, p, index).flow);
    return out;
}

enum class LossKind { L1 };

struct LossResult {
    double loss = 0.0;
    Gradients grads;
};

/// Mean per-point L1 endpoint loss |p_i + flow_i - target_i| with exact
/// analytic gradients through the softmax and embedding. sign(0) = 0, so a
/// zero-residual instance yields exactly zero gradients.
inline LossResult loss_and_gradients(const EstimatorParams& params, const PointCloud& first,
                                     const PointCloud& second, const std::vector<Vec3>& target_points,
                                     LossKind kind = LossKind::L1) {
    (void)kind;  // single loss form
    if (first.empty() || second.empty()) throw EmptyCloud("loss_and_gradients: empty frame");
    if (target_points.size() != first.size())
        throw LengthMismatch("loss_and_gradients: targets not aligned with first frame");

    const KnnIndex index(second);
    const double tau = params.temperature();
    const double inv_n = 1.0 / double(first.size());

    LossResult result;
    result.grads = Gradients::zero_like(params);

    for (std::size_t i = 0; i < first.size(); ++i) {
        const Vec3& p = first.points[i];
        const detail::SoftMatch m = detail::soft_match(params, p, index);
        const Vec3 residual = p + m.flow - target_points[i];
        result.loss += inv_n * residual.cwiseAbs().sum();

        Vec3 sign = Vec3::Zero();
        for (int c = 0; c < 3; ++c) sign[c] = residual[c] > 0.0 ? 1.0 : (residual[c] < 0.0 ? -1.0 : 0.0);
        const Vec3 dflow = inv_n * sign;

        for (std::size_t j = 0; j < m.candidates.size(); ++j) {
            const Vec3& q = index.points()[m.candidates[j]];
            const Vec3 offset = q - p;
            // d flow / d score_j = w_j (offset_j - flow)
            const double g = m.weights[j] * dflow.dot(offset - m.flow);
            if (g == 0.0) continue;
            const Vec3 v = p - q;
            const Eigen::VectorXd u = params.embedding.transpose() * v;
            // score_j = -|v E|^2 / tau
            result.grads.d_embedding.noalias() += (-2.0 / tau * g) * (v * u.transpose());
            result.grads.d_log_temperature += g * m.embed_sqnorms[j] / tau;
        }
    }
    if (!std::isfinite(result.loss) || !result.grads.all_finite())
        throw NonFiniteLoss("loss_and_gradients: non-finite loss or gradients");
    return result;
}

/// Hard nearest-neighbor flow: each point maps to its closest second-frame
/// point. Baseline and refinement input; no learned parameters.
inline FlowField nn_baseline_flow(const PointCloud& first, const PointCloud& second) {
    if (second.empty()) throw EmptyCloud("nn_baseline_flow: empty second frame");
    const KnnIndex index(second);
    FlowField out;
    out.vectors.reserve(first.size());
    for (const Vec3& p : first.points) {
        const std::vector<Neighbor> nn = index.knn(p, 1);
        out.vectors.push_back(index.points()[nn[0].index] - p);
    }
    return out;
}

struct SgdConfig {
    double learning_rate = 0.05;
    double clip_norm = 10.0;
};

/// One SGD step with global gradient-norm clipping.
inline void sgd_step(EstimatorParams& params, const Gradients& grads, const SgdConfig& cfg) {
    double scale = 1.0;
    const double norm = grads.norm();
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
    params.embedding.noalias() -= cfg.learning_rate * scale * grads.d_embedding;
    params.log_temperature -= cfg.learning_rate * scale * grads.d_log_temperature;
}

}  // namespace sfuda
