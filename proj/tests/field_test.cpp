// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/error.hpp"
#include "progsplat/field.hpp"
#include "progsplat/rasterizer.hpp"
#include "progsplat/spatial_index.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>

using namespace progsplat;

namespace {

std::vector<Vec3> random_points(std::mt19937_64& rng, int n, double extent = 1.0) {
    std::uniform_real_distribution<double> u(-extent, extent);
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    return pts;
}

double linear_scan(const std::vector<Vec3>& pts, const Vec3& q) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, (p - q).norm());
    return best;
}

} // namespace

TEST(Covariance, IdentityQuaternionUnitScale) {
    const Mat3 c = covariance_from_params({1, 0, 0, 0}, {0, 0, 0});
    EXPECT_TRUE(c.isApprox(Mat3::Identity(), 1e-14));
}

TEST(Covariance, AxisScale) {
    const Mat3 c = covariance_from_params({1, 0, 0, 0}, {std::log(2.0), 0, 0});
    Mat3 expected = Mat3::Zero();
    expected.diagonal() << 4, 1, 1;
    EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, QuarterTurnAboutZ) {
    const double h = std::sqrt(0.5);
    const Mat3 c = covariance_from_params({h, 0, 0, h}, {std::log(2.0), 0, 0});
    Mat3 expected = Mat3::Zero();
    expected.diagonal() << 1, 4, 1;
    EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, ZeroQuaternionRejected) {
    try {
        covariance_from_params({0, 0, 0, 0}, {0, 0, 0});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidParameter);
    }
}

TEST(Covariance, RandomDrawsAreSymmetricPsd) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> s(-4.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 c = covariance_from_params({n(rng), n(rng), n(rng), n(rng)}, {s(rng), s(rng), s(rng)});
        EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(c);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
    }
}

TEST(SpatialIndexTest, MatchesLinearScan) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = random_points(rng, 1 + trial * 37);
        const SpatialIndex index(pts);
        for (const auto& q : random_points(rng, 50, 1.5)) {
            EXPECT_DOUBLE_EQ(index.nearest_distance(q), linear_scan(pts, q));
        }
    }
}

TEST(SpatialIndexTest, KNearestOrderedAndExact) {
    std::mt19937_64 rng(6);
    const auto pts = random_points(rng, 300);
    const SpatialIndex index(pts);
    for (const auto& q : random_points(rng, 20)) {
        const auto knn = index.k_nearest(q, 5);
        ASSERT_EQ(knn.size(), 5u);
        std::vector<double> d;
        for (const auto& p : pts) d.push_back((p - q).norm());
        std::sort(d.begin(), d.end());
        for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(knn[k].distance, d[k]);
    }
}

TEST(SpatialIndexTest, EmptyIsInfinite) {
    EXPECT_TRUE(std::isinf(SpatialIndex().nearest_distance(Vec3::Zero())));
}

TEST(FilterNewPoints, CoincidentExcluded) {
    const SpatialIndex index({Vec3(1, 2, 3)});
    const std::vector<SparsePoint> c{{Vec3(1, 2, 3), Vec3::Zero()}};
    EXPECT_TRUE(filter_new_points(index, c, 1e-9).empty());
}

TEST(FilterNewPoints, DistantIncluded) {
    const SpatialIndex index({Vec3::Zero()});
    const std::vector<SparsePoint> c{{Vec3(3, 0, 0), Vec3::Zero()}};
    EXPECT_EQ(filter_new_points(index, c, 1.0).size(), 1u);
}

TEST(FilterNewPoints, ExactlyAtThresholdExcluded) {
    const SpatialIndex index({Vec3::Zero()});
    const std::vector<SparsePoint> c{{Vec3(1, 0, 0), Vec3::Zero()}};
    EXPECT_TRUE(filter_new_points(index, c, 1.0).empty());
}

TEST(FilterNewPoints, EmptyIndexAdmitsAll) {
    const std::vector<SparsePoint> c(4);
    EXPECT_EQ(filter_new_points(SpatialIndex(), c, 0.5).size(), 4u);
}

TEST(FilterNewPoints, NonPositiveThresholdRejected) {
    const std::vector<SparsePoint> c(1);
    EXPECT_THROW(filter_new_points(SpatialIndex(), c, 0.0), Error);
}

TEST(FilterNewPoints, MatchesLinearScanOracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const int existing = trial == 29 ? 10000 : 100;
        const auto pts = random_points(rng, existing);
        const SpatialIndex index(pts);
        std::vector<SparsePoint> candidates;
        for (const auto& p : random_points(rng, 50)) candidates.push_back({p, Vec3::Zero()});
        const double threshold = trial == 29 ? 0.02 : 0.1;
        std::vector<Vec3> expected;
        for (const auto& c : candidates) {
            if (linear_scan(pts, c.position) > threshold) expected.push_back(c.position);
        }
        const auto got = filter_new_points(index, candidates, threshold);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].position, expected[i]);
    }
}

TEST(InsertPoints, EmptyListLeavesGenerationAlone) {
    GaussianField field;
    const auto gen = field.generation;
    EXPECT_EQ(insert_points(field, {}), 0u);
    EXPECT_EQ(field.generation, gen);
}

TEST(InsertPoints, TenPointsOneGeneration) {
    std::mt19937_64 rng(9);
    GaussianField field;
    std::vector<SparsePoint> pts;
    for (const auto& p : random_points(rng, 10)) pts.push_back({p, Vec3(0.5, 0.5, 0.5)});
    EXPECT_EQ(insert_points(field, pts), 10u);
    EXPECT_EQ(field.size(), 10u);
    EXPECT_EQ(field.generation, 1u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(field.gaussians[i].position[0], pts[i].position.x());
        EXPECT_NEAR(sigmoid(field.gaussians[i].opacity_logit), 0.1, 1e-12);
        EXPECT_EQ(field.gaussians[i].log_scale[0], field.gaussians[i].log_scale[1]);
        EXPECT_EQ(field.gaussians[i].log_scale[0], field.gaussians[i].log_scale[2]);
    }
    EXPECT_TRUE(field.all_finite());
}

TEST(InsertPoints, ScaleIsMeanDistanceToThreeNearest) {
    GaussianField field;
    const std::vector<SparsePoint> pts{
        {Vec3(0, 0, 0), Vec3::Zero()}, {Vec3(1, 0, 0), Vec3::Zero()}, {Vec3(0, 2, 0), Vec3::Zero()},
        {Vec3(0, 0, 3), Vec3::Zero()}, {Vec3(10, 10, 10), Vec3::Zero()}};
    insert_points(field, pts);
    EXPECT_NEAR(std::exp(field.gaussians[0].log_scale[0]), 2.0, 1e-12);
}

TEST(InsertPoints, NonFiniteSkippedAndLogged) {
    GaussianField field;
    Diagnostics diag;
    const std::vector<SparsePoint> pts{{Vec3(0, 0, 0), Vec3::Zero()},
                                       {Vec3(std::nan(""), 0, 0), Vec3::Zero()}};
    EXPECT_EQ(insert_points(field, pts, {}, &diag), 1u);
    EXPECT_EQ(diag.skipped_points, 1u);
    EXPECT_TRUE(field.all_finite());
}

TEST(InsertPoints, RedPointRendersRed) {
    GaussianField field;
    const std::vector<SparsePoint> pts{{Vec3::Zero(), Vec3(1, 0, 0)}};
    insert_points(field, pts, {0.9, 0.2});
    const auto cam = progsplat::testing::make_camera(32, 32, 30);
    const auto out = render(field, cam, {});
    const double r = out.color.at(16, 16, 0), g = out.color.at(16, 16, 1), b = out.color.at(16, 16, 2);
    EXPECT_GT(r, 0.5);
    EXPECT_GT(r, 5 * std::max(g, b));
}

TEST(InsertPoints, ExpansionIsIdempotent) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> cloud = random_points(rng, 200);
        std::vector<SparsePoint> candidates;
        for (const auto& p : random_points(rng, 60, 1.4)) candidates.push_back({p, Vec3::Zero()});
        const double threshold = 0.15;
        const auto novel = filter_new_points(SpatialIndex(cloud), candidates, threshold);
        GaussianField field;
        insert_points(field, novel);
        for (const auto& p : novel) cloud.push_back(p.position);
        EXPECT_TRUE(filter_new_points(SpatialIndex(cloud), candidates, threshold).empty());
    }
}

namespace {

GaussianField opaque_field(int n) {
    GaussianField field;
    for (int i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {static_cast<double>(i), 0, 0};
        g.rotation = {1, 0, 0, 0};
        g.log_scale = {std::log(0.001), std::log(0.001), std::log(0.001)};
        g.opacity_logit = logit(0.9);
        field.gaussians.push_back(g);
    }
    return field;
}

} // namespace

TEST(Densify, NothingToDo) {
    auto field = opaque_field(5);
    const auto gen = field.generation;
    std::mt19937_64 rng(1);
    const std::vector<double> grads(5, 0.0);
    const auto summary = densify_and_prune(field, grads, {}, rng);
    EXPECT_FALSE(summary.changed());
    EXPECT_EQ(field.size(), 5u);
    EXPECT_EQ(field.generation, gen);
}

TEST(Densify, PruneLowOpacity) {
    auto field = opaque_field(5);
    field.gaussians[2].opacity_logit = logit(0.001);
    std::mt19937_64 rng(1);
    const std::vector<double> grads(5, 0.0);
    const auto summary = densify_and_prune(field, grads, {}, rng);
    EXPECT_EQ(summary.pruned, 1u);
    EXPECT_EQ(field.size(), 4u);
    EXPECT_GT(field.generation, 0u);
    EXPECT_EQ(summary.origin, (std::vector<std::ptrdiff_t>{0, 1, 3, 4}));
}

TEST(Densify, SplitLargeHighGradient) {
    auto field = opaque_field(1);
    field.gaussians[0].log_scale = {std::log(0.5), std::log(0.2), std::log(0.2)};
    std::mt19937_64 rng(1);
    const std::vector<double> grads{1.0};
    const auto summary = densify_and_prune(field, grads, {}, rng);
    EXPECT_EQ(summary.split, 1u);
    ASSERT_EQ(field.size(), 2u);
    for (const auto& g : field.gaussians) EXPECT_NEAR(std::exp(g.log_scale[0]), 0.5 / 1.6, 1e-12);
    EXPECT_TRUE(field.all_finite());
}

TEST(Densify, CloneSmallHighGradient) {
    auto field = opaque_field(1);
    std::mt19937_64 rng(1);
    const std::vector<double> grads{1.0};
    const auto summary = densify_and_prune(field, grads, {}, rng);
    EXPECT_EQ(summary.cloned, 1u);
    ASSERT_EQ(field.size(), 2u);
    EXPECT_EQ(summary.origin[0], 0);
    EXPECT_EQ(summary.origin[1], -1);
}

TEST(Densify, LengthMismatchRejected) {
    auto field = opaque_field(3);
    std::mt19937_64 rng(1);
    const std::vector<double> grads(2, 0.0);
    EXPECT_THROW(densify_and_prune(field, grads, {}, rng), Error);
}

TEST(Densify, GenerationStrictlyIncreases) {
    std::mt19937_64 rng(2);
    auto field = progsplat::testing::random_field(rng, {.count = 30, .sh_degree = 1});
    std::uniform_real_distribution<double> u(0.0, 0.001);
    auto gen = field.generation;
    for (int round = 0; round < 10; ++round) {
        std::vector<double> grads(field.size());
        for (auto& g : grads) g = u(rng);
        field.gaussians[0].opacity_logit = logit(0.001);
        densify_and_prune(field, grads, {.grad_threshold = 0.0008, .scene_extent = 5.0}, rng);
        EXPECT_GT(field.generation, gen);
        gen = field.generation;
        EXPECT_TRUE(field.all_finite());
    }
}
