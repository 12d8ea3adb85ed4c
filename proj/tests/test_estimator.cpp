#include <gtest/gtest.h>

#include <cmath>

#include "sfuda/estimator.hpp"
#include "sfuda/random.hpp"

using namespace sfuda;

namespace {

PointCloud random_cloud(Rng& rng, int n, double scale = 2.0) {
    PointCloud out;
    for (int i = 0; i < n; ++i)
        out.points.emplace_back(uniform_real(rng, -scale, scale), uniform_real(rng, -scale, scale),
                                uniform_real(rng, -scale, scale));
    return out;
}

EstimatorParams random_params(Rng& rng, int dim, int candidate_k) {
    EstimatorParams p = EstimatorParams::make(dim, candidate_k);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < dim; ++c) p.embedding(r, c) = normal(rng, 0.0, 0.6);
    p.log_temperature = uniform_real(rng, -0.5, 0.5);
    return p;
}

// Central finite differences over every parameter entry.
double loss_only(const EstimatorParams& p, const PointCloud& a, const PointCloud& b,
                 const std::vector<Vec3>& targets) {
    return loss_and_gradients(p, a, b, targets).loss;
}

}  // namespace

TEST(PredictFlow, IdenticalCloudsSingleCandidateIsExactlyZero) {
    Rng rng = make_rng(51);
    const PointCloud cloud = random_cloud(rng, 40);
    EstimatorParams p = random_params(rng, 8, 1);
    const FlowField flow = predict_flow(p, cloud, cloud);
    for (const Vec3& v : flow.vectors) EXPECT_EQ(v, Vec3::Zero());
}

TEST(PredictFlow, IdenticalCloudsNearZeroWithManyCandidates) {
    Rng rng = make_rng(52);
    // well-separated points: softmax mass concentrates on the zero offset
    PointCloud cloud;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 3; ++k) cloud.points.emplace_back(i * 3.0, j * 3.0, k * 3.0);
    const EstimatorParams p = EstimatorParams::make(8, 16);
    const FlowField flow = predict_flow(p, cloud, cloud);
    for (const Vec3& v : flow.vectors) EXPECT_LT(v.norm(), 1e-2);
}

TEST(PredictFlow, SingleCandidateIgnoresParams) {
    Rng rng = make_rng(53);
    const PointCloud first = random_cloud(rng, 30);
    const PointCloud second = random_cloud(rng, 30);
    EstimatorParams p = random_params(rng, 6, 1);
    const FlowField flow = predict_flow(p, first, second);
    const FlowField nn = nn_baseline_flow(first, second);
    for (std::size_t i = 0; i < flow.size(); ++i) EXPECT_EQ(flow.vectors[i], nn.vectors[i]);
}

TEST(PredictFlow, ColdLimitMatchesArgminOracle) {
    Rng rng = make_rng(54);
    const PointCloud first = random_cloud(rng, 25);
    const PointCloud second = random_cloud(rng, 60);
    EstimatorParams p = random_params(rng, 5, 8);
    p.log_temperature = std::log(1e-6);

    const KnnIndex index(second);
    const FlowField flow = predict_flow(p, first, second);
    for (std::size_t i = 0; i < first.size(); ++i) {
        // embedding-nearest candidate among the Euclidean k-NN set
        const auto cands = index.knn(first.points[i], p.candidate_k);
        double best = std::numeric_limits<double>::infinity();
        Vec3 best_offset = Vec3::Zero();
        for (const Neighbor& nb : cands) {
            const Vec3 v = first.points[i] - second.points[nb.index];
            const double s = (p.embedding.transpose() * v).squaredNorm();
            if (s < best) {
                best = s;
                best_offset = second.points[nb.index] - first.points[i];
            }
        }
        EXPECT_LT((flow.vectors[i] - best_offset).norm(), 1e-9);
    }
}

TEST(PredictFlow, ConvexHullBoundProperty) {
    Rng rng = make_rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud first = random_cloud(rng, 20);
        const PointCloud second = random_cloud(rng, 50);
        const EstimatorParams p = random_params(rng, 8, 12);
        const KnnIndex index(second);
        const FlowField flow = predict_flow(p, first, second);
        for (std::size_t i = 0; i < first.size(); ++i) {
            const auto cands = index.knn(first.points[i], p.candidate_k);
            double max_offset = 0.0;
            for (const Neighbor& nb : cands) max_offset = std::max(max_offset, nb.distance);
            EXPECT_LE(flow.vectors[i].norm(), max_offset + 1e-12);
        }
    }
}

TEST(PredictFlow, DeterministicBitIdentical) {
    Rng rng = make_rng(56);
    const PointCloud first = random_cloud(rng, 50);
    const PointCloud second = random_cloud(rng, 50);
    const EstimatorParams p = random_params(rng, 8, 10);
    const FlowField a = predict_flow(p, first, second);
    const FlowField b = predict_flow(p, first, second);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.vectors[i], b.vectors[i]);
}

TEST(PredictFlow, EmptyCloudThrows) {
    const EstimatorParams p = EstimatorParams::make();
    PointCloud cloud;
    cloud.points.emplace_back(0, 0, 0);
    EXPECT_THROW(predict_flow(p, PointCloud{}, cloud), EmptyCloud);
    EXPECT_THROW(predict_flow(p, cloud, PointCloud{}), EmptyCloud);
}

TEST(Loss, ZeroAtOwnPrediction) {
    Rng rng = make_rng(57);
    const PointCloud first = random_cloud(rng, 25);
    const PointCloud second = random_cloud(rng, 40);
    const EstimatorParams p = random_params(rng, 6, 8);
    const FlowField flow = predict_flow(p, first, second);
    std::vector<Vec3> targets(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) targets[i] = first.points[i] + flow.vectors[i];
    const LossResult out = loss_and_gradients(p, first, second, targets);
    EXPECT_EQ(out.loss, 0.0);
    EXPECT_EQ(out.grads.d_embedding.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(out.grads.d_log_temperature, 0.0);
}

TEST(Loss, L1Homogeneity) {
    Rng rng = make_rng(58);
    const PointCloud first = random_cloud(rng, 20);
    const PointCloud second = random_cloud(rng, 30);
    const EstimatorParams p = random_params(rng, 6, 6);
    const FlowField flow = predict_flow(p, first, second);

    // residual r_i and 2 r_i around the fixed prediction
    std::vector<Vec3> near(first.size()), far(first.size());
    Rng rng2 = make_rng(580);
    for (std::size_t i = 0; i < first.size(); ++i) {
        const Vec3 r(normal(rng2, 0, 0.2), normal(rng2, 0, 0.2), normal(rng2, 0, 0.2));
        near[i] = first.points[i] + flow.vectors[i] - r;
        far[i] = first.points[i] + flow.vectors[i] - 2.0 * r;
    }
    const double l1 = loss_only(p, first, second, near);
    const double l2 = loss_only(p, first, second, far);
    EXPECT_NEAR(l2, 2.0 * l1, 1e-12);
}

TEST(Loss, AnalyticGradientsMatchFiniteDifferences) {
    Rng rng = make_rng(59);
    const double h = 1e-5;
    int instances = 0;
    while (instances < 20) {
        const PointCloud first = random_cloud(rng, 20);
        const PointCloud second = random_cloud(rng, 35);
        EstimatorParams p = random_params(rng, 4, 6);
        std::vector<Vec3> targets(first.size());
        for (std::size_t i = 0; i < first.size(); ++i)
            targets[i] = first.points[i] + Vec3(normal(rng, 0, 0.4), normal(rng, 0, 0.4),
                                                normal(rng, 0, 0.4));

        // keep residual components away from the L1 kink
        const FlowField flow = predict_flow(p, first, second);
        double min_res = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < first.size(); ++i) {
            const Vec3 r = first.points[i] + flow.vectors[i] - targets[i];
            min_res = std::min(min_res, r.cwiseAbs().minCoeff());
        }
        if (min_res < 1e-3) continue;
        ++instances;

        const LossResult out = loss_and_gradients(p, first, second, targets);

        double num_sq = 0.0, den_sq = 0.0;
        auto probe = [&](double* entry, double analytic) {
            const double save = *entry;
            *entry = save + h;
            const double lp = loss_only(p, first, second, targets);
            *entry = save - h;
            const double lm = loss_only(p, first, second, targets);
            *entry = save;
            const double fd = (lp - lm) / (2.0 * h);
            num_sq += (analytic - fd) * (analytic - fd);
            den_sq += fd * fd;
        };
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < p.dim(); ++c) probe(&p.embedding(r, c), out.grads.d_embedding(r, c));
        probe(&p.log_temperature, out.grads.d_log_temperature);

        const double rel = std::sqrt(num_sq) / std::max(std::sqrt(den_sq), 1e-12);
        EXPECT_LT(rel, 1e-4);
    }
}

TEST(NnBaseline, SimpleCases) {
    Rng rng = make_rng(60);
    const PointCloud first = random_cloud(rng, 30, 5.0);

    FlowField zero = nn_baseline_flow(first, first);
    for (const Vec3& v : zero.vectors) EXPECT_EQ(v, Vec3::Zero());

    PointCloud shifted = first;
    const Vec3 delta(0.05, -0.02, 0.01);  // small against point spacing
    for (Vec3& p : shifted.points) p += delta;
    const FlowField f = nn_baseline_flow(first, shifted);
    for (const Vec3& v : f.vectors) EXPECT_LT((v - delta).norm(), 1e-12);

    EXPECT_THROW(nn_baseline_flow(first, PointCloud{}), EmptyCloud);
}

TEST(Sgd, ClipsByGlobalNorm) {
    EstimatorParams p = EstimatorParams::make(4, 4);
    Gradients g = Gradients::zero_like(p);
    g.d_embedding.setConstant(100.0);
    g.d_log_temperature = 100.0;
    const double norm = g.norm();
    const EstimatorParams before = p;
    sgd_step(p, g, SgdConfig{0.1, 10.0});
    const double moved = std::sqrt((before.embedding - p.embedding).squaredNorm() +
                                   std::pow(before.log_temperature - p.log_temperature, 2));
    EXPECT_GT(norm, 10.0);
    EXPECT_NEAR(moved, 0.1 * 10.0, 1e-9);
}
