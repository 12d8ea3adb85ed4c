#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sfuda/geometry.hpp"
#include "sfuda/knn.hpp"
#include "sfuda/random.hpp"

using namespace sfuda;

namespace {

Vec3 random_point(Rng& rng, double scale = 5.0) {
    return Vec3(uniform_real(rng, -scale, scale), uniform_real(rng, -scale, scale),
                uniform_real(rng, -scale, scale));
}

// Uniform random rotation from a normalized quaternion, written as a
// row-convention matrix (p * R).
Mat3 random_rotation(Rng& rng) {
    const double q0 = normal(rng), q1 = normal(rng), q2 = normal(rng), q3 = normal(rng);
    Eigen::Quaterniond q(q0, q1, q2, q3);
    q.normalize();
    return q.toRotationMatrix().transpose();
}

RigidMotion random_motion(Rng& rng) {
    RigidMotion m;
    m.rotation = random_rotation(rng);
    m.translation = random_point(rng, 3.0);
    return m;
}

std::vector<Vec3> random_cloud(Rng& rng, int n, double scale = 5.0) {
    std::vector<Vec3> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(random_point(rng, scale));
    return out;
}

double rmsd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
    return std::sqrt(sum / double(a.size()));
}

std::vector<Vec3> apply_all(const std::vector<Vec3>& pts, const RigidMotion& m) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(m.apply(p));
    return out;
}

// Independent oracle: brute-force neighbor scan with (distance, index)
// tie-breaking.
std::vector<Neighbor> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, int k) {
    std::vector<std::pair<double, int>> all;
    all.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - q).norm(), int(i));
    std::sort(all.begin(), all.end());
    const std::size_t want = std::min<std::size_t>(std::size_t(k), all.size());
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < want; ++i) out.push_back(Neighbor{all[i].second, all[i].first});
    return out;
}

}  // namespace

TEST(RigidMotion, IdentityAndComposition) {
    Rng rng = make_rng(11);
    const RigidMotion a = random_motion(rng);
    const RigidMotion b = random_motion(rng);
    const Vec3 p = random_point(rng);
    EXPECT_LT((RigidMotion::identity().apply(p) - p).norm(), 1e-15);
    // two successive motions equal the composed motion applied once
    EXPECT_LT((b.apply(a.apply(p)) - a.then(b).apply(p)).norm(), 1e-12);
    EXPECT_LT((a.inverse().apply(a.apply(p)) - p).norm(), 1e-12);
}

TEST(ApplyMotion, PreservesDistancesAndLabels) {
    Rng rng = make_rng(12);
    PointCloud cloud;
    cloud.points = random_cloud(rng, 40);
    cloud.labels.assign(40, 7);
    const RigidMotion m = random_motion(rng);
    const PointCloud moved = apply_motion(cloud, m);
    ASSERT_EQ(moved.labels, cloud.labels);
    for (int i = 0; i < 40; ++i)
        for (int j = i + 1; j < 40; ++j) {
            const double before = (cloud.points[i] - cloud.points[j]).norm();
            const double after = (moved.points[i] - moved.points[j]).norm();
            EXPECT_NEAR(before, after, 1e-12);
        }
}

TEST(Kabsch, IdentityCase) {
    Rng rng = make_rng(13);
    const std::vector<Vec3> pts = random_cloud(rng, 4);
    const RigidMotion m = kabsch_fit(pts, pts);
    EXPECT_LT((m.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(m.translation.norm(), 1e-12);
}

TEST(Kabsch, RecoversConstructedMotion) {
    Rng rng = make_rng(14);
    const std::vector<Vec3> src = random_cloud(rng, 5);
    RigidMotion truth = rotation_about_up(30.0 * M_PI / 180.0);
    truth.translation = Vec3(1, 2, 3);
    const RigidMotion fit = kabsch_fit(src, apply_all(src, truth));
    EXPECT_LT((fit.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((fit.translation - truth.translation).norm(), 1e-9);
}

TEST(Kabsch, RoundTripPropertyAndValidity) {
    Rng rng = make_rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + int(uniform_below(rng, 48));
        const std::vector<Vec3> src = random_cloud(rng, n);
        const RigidMotion truth = random_motion(rng);
        const RigidMotion fit = kabsch_fit(src, apply_all(src, truth));
        EXPECT_TRUE(fit.valid(1e-9));
        EXPECT_LT((fit.rotation - truth.rotation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((fit.translation - truth.translation).norm(), 1e-9);
    }
}

TEST(Kabsch, NoisyFitBeatsRandomRotationOracle) {
    Rng rng = make_rng(16);
    const int n = 30;
    const std::vector<Vec3> src = random_cloud(rng, n);
    const RigidMotion truth = random_motion(rng);
    std::vector<Vec3> dst = apply_all(src, truth);
    for (Vec3& p : dst) p += Vec3(normal(rng, 0, 0.01), normal(rng, 0, 0.01), normal(rng, 0, 0.01));

    const RigidMotion fit = kabsch_fit(src, dst);
    const double fitted = rmsd(apply_all(src, fit), dst);

    double best = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 1000; ++trial) {
        RigidMotion cand;
        cand.rotation = random_rotation(rng);
        // optimal translation for a fixed rotation: match centroids
        Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
        for (int i = 0; i < n; ++i) {
            cs += src[i];
            cd += dst[i];
        }
        cand.translation = cd / n - cand.rotation.transpose() * (cs / n);
        best = std::min(best, rmsd(apply_all(src, cand), dst));
    }
    EXPECT_LE(fitted, best + 1e-12);
}

TEST(Kabsch, NearPlanarInputStaysValid) {
    Rng rng = make_rng(17);
    std::vector<Vec3> src;
    for (int i = 0; i < 25; ++i)
        src.emplace_back(uniform_real(rng, -2, 2), uniform_real(rng, -2, 2), normal(rng, 0, 1e-10));
    const RigidMotion truth = random_motion(rng);
    const RigidMotion fit = kabsch_fit(src, apply_all(src, truth));
    EXPECT_TRUE(fit.valid(1e-9));
    EXPECT_LT(rmsd(apply_all(src, fit), apply_all(src, truth)), 1e-9);
}

TEST(Kabsch, DegenerateInputsThrow) {
    const std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(1, 0, 0)};
    EXPECT_THROW(kabsch_fit(two, two), DegenerateCluster);

    std::vector<Vec3> line;
    for (int i = 0; i < 6; ++i) line.emplace_back(double(i), 0, 0);
    EXPECT_THROW(kabsch_fit(line, line), DegenerateCluster);

    const std::vector<Vec3> same(5, Vec3(1, 2, 3));
    EXPECT_THROW(kabsch_fit(same, same), DegenerateCluster);
}

TEST(Knn, SelfQueryAndLineCase) {
    std::vector<Vec3> line;
    for (int i = 0; i < 5; ++i) line.emplace_back(double(i), 0, 0);
    const KnnIndex index(line);

    const auto self = index.knn(Vec3(3, 0, 0), 1);
    ASSERT_EQ(self.size(), 1u);
    EXPECT_EQ(self[0].index, 3);
    EXPECT_EQ(self[0].distance, 0.0);

    // distances from x = 2.1: |2.1-2| = 0.1, |2.1-3| = 0.9, |2.1-1| = 1.1
    const auto three = index.knn(Vec3(2.1, 0, 0), 3);
    ASSERT_EQ(three.size(), 3u);
    EXPECT_EQ(three[0].index, 2);
    EXPECT_EQ(three[1].index, 3);
    EXPECT_EQ(three[2].index, 1);
}

TEST(Knn, TieBreaksByLowerIndex) {
    // query equidistant from two points
    const std::vector<Vec3> pts{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 5, 0)};
    const auto got = KnnIndex(pts).knn(Vec3(0, 0, 0), 2);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].index, 0);
    EXPECT_EQ(got[1].index, 1);
}

TEST(Knn, MatchesBruteForceOracle) {
    Rng rng = make_rng(18);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + int(uniform_below(rng, 1000));
        std::vector<Vec3> pts = random_cloud(rng, n, 10.0);
        // sprinkle duplicates to exercise ties
        if (n > 4) {
            pts[1] = pts[0];
            pts[3] = pts[2];
        }
        const KnnIndex index(pts);
        for (int q = 0; q < 10; ++q) {
            const Vec3 query = random_point(rng, 10.0);
            const int k = 1 + int(uniform_below(rng, 12));
            const auto got = index.knn(query, k);
            const auto want = brute_knn(pts, query, k);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].index, want[i].index);
                EXPECT_NEAR(got[i].distance, want[i].distance, 1e-12);
            }
        }
    }
}

TEST(Knn, RadiusMatchesBruteForce) {
    Rng rng = make_rng(19);
    const std::vector<Vec3> pts = random_cloud(rng, 300, 3.0);
    const KnnIndex index(pts);
    for (int q = 0; q < 20; ++q) {
        const Vec3 query = random_point(rng, 3.0);
        const double r = uniform_real(rng, 0.2, 2.0);
        const auto got = index.radius(query, r);
        std::vector<int> want;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if ((pts[i] - query).norm() <= r) want.push_back(int(i));
        EXPECT_EQ(got, want);
    }
}

TEST(Knn, EmptyCloudThrows) {
    const KnnIndex index((std::vector<Vec3>()));
    EXPECT_THROW(index.knn(Vec3::Zero(), 1), EmptyCloud);
}

TEST(RotationAboutUp, RowConventionDirection) {
    // 90 degrees: +x heads to +y for row vectors
    const RigidMotion r = rotation_about_up(M_PI / 2.0);
    const Vec3 moved = r.apply(Vec3(1, 0, 0));
    EXPECT_LT((moved - Vec3(0, 1, 0)).norm(), 1e-12);
}
