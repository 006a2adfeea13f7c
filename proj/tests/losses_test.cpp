// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/error.hpp"
#include "progsplat/losses.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace progsplat;
using progsplat::testing::random_image;
using progsplat::testing::relative_error;

namespace {

RenderOutput counts_output(int w, int h, std::vector<double> soft) {
    RenderOutput out;
    out.width = w;
    out.height = h;
    out.soft_count = std::move(soft);
    out.blended_count.assign(out.soft_count.size(), 0);
    for (std::size_t i = 0; i < out.soft_count.size(); ++i) {
        out.blended_count[i] = static_cast<int>(std::lround(out.soft_count[i]));
    }
    return out;
}

} // namespace

TEST(L1, Examples) {
    EXPECT_EQ(l1_loss(Image(4, 4, 0.3), Image(4, 4, 0.3)).value, 0.0);
    EXPECT_DOUBLE_EQ(l1_loss(Image(4, 4, 0.0), Image(4, 4, 1.0)).value, 1.0);
    Image a(4, 2, 0.0), b(4, 2, 0.0);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
            for (int c = 0; c < 3; ++c) a.at(x, y, c) = 0.5;
        }
    }
    EXPECT_DOUBLE_EQ(l1_loss(a, b).value, 0.25);
}

TEST(L1, GradientIsScaledSign) {
    Image a(3, 2, 0.2), b(3, 2, 0.5);
    a.at(1, 1, 2) = 0.9;
    const auto r = l1_loss(a, b);
    EXPECT_DOUBLE_EQ(r.grad.at(0, 0, 0), -1.0 / 18.0);
    EXPECT_DOUBLE_EQ(r.grad.at(1, 1, 2), 1.0 / 18.0);
}

TEST(L1, DimensionMismatch) {
    EXPECT_THROW(l1_loss(Image(4, 4), Image(4, 5)), Error);
}

TEST(Ssim, IdenticalIsZeroLoss) {
    std::mt19937_64 rng(1);
    const auto a = random_image(rng, 16, 16);
    EXPECT_NEAR(ssim_loss(a, a).value, 0.0, 1e-14);
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
    const double expected = kSsimC1 / (1.0 + kSsimC1);
    EXPECT_NEAR(ssim(Image(16, 16, 0.0), Image(16, 16, 1.0)), expected, 1e-12);
    EXPECT_NEAR(ssim_loss(Image(16, 16, 0.0), Image(16, 16, 1.0)).value, 1.0 - expected, 1e-12);
}

TEST(Ssim, MatchesDirectSummationReference) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_image(rng, 13 + trial * 3, 11 + trial * 2);
        auto b = a;
        std::normal_distribution<double> n(0.0, 0.1 * trial);
        for (auto& v : b.data) v += n(rng);
        EXPECT_NEAR(ssim(a, b), progsplat::testing::reference_ssim(a, b), 1e-12);
    }
    EXPECT_NEAR(ssim(Image(16, 16, 0.0), Image(16, 16, 1.0)),
                progsplat::testing::reference_ssim(Image(16, 16, 0.0), Image(16, 16, 1.0)), 1e-6);
}

TEST(Ssim, Symmetric) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_image(rng, 20, 17);
        const auto b = random_image(rng, 20, 17);
        EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    }
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    const auto a = random_image(rng, 16, 16);
    const auto b = random_image(rng, 16, 16);
    const auto r = ssim_loss(a, b);
    const double h = 1e-6;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        Image p = a, m = a;
        p.data[i] += h;
        m.data[i] -= h;
        const double fd = (ssim_loss(p, b).value - ssim_loss(m, b).value) / (2 * h);
        EXPECT_LT(relative_error(r.grad.data[i], fd, 1e-9), 1e-3) << "element " << i;
    }
}

TEST(Ssim, TooSmallRejected) {
    EXPECT_THROW(ssim_loss(Image(10, 16), Image(10, 16)), Error);
    EXPECT_THROW(ssim_loss(Image(16, 16), Image(16, 15)), Error);
}

TEST(Load, Examples) {
    EXPECT_DOUBLE_EQ(load_balancing_loss(counts_output(2, 1, {0.0, 4.0})).value, 2.0);
    EXPECT_EQ(load_balancing_loss(counts_output(3, 3, std::vector<double>(9, 2.5))).value, 0.0);
}

TEST(Load, TranslationInvariant) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    std::vector<double> soft(64);
    for (auto& v : soft) v = u(rng);
    auto shifted = soft;
    for (auto& v : shifted) v += 3.0;
    EXPECT_NEAR(load_balancing_loss(counts_output(8, 8, soft)).value,
                load_balancing_loss(counts_output(8, 8, shifted)).value, 1e-12);
}

TEST(Load, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    std::vector<double> soft(30);
    for (auto& v : soft) v = u(rng);
    const auto r = load_balancing_loss(counts_output(6, 5, soft));
    const double h = 1e-6;
    for (std::size_t i = 0; i < soft.size(); ++i) {
        auto p = soft, m = soft;
        p[i] += h;
        m[i] -= h;
        const double fd = (load_balancing_loss(counts_output(6, 5, p)).value -
                           load_balancing_loss(counts_output(6, 5, m)).value) / (2 * h);
        EXPECT_LT(relative_error(r.grad[i], fd), 1e-6);
    }
}

TEST(Load, IntegerStdReported) {
    const auto r = load_balancing_loss(counts_output(2, 1, {1.0, 3.0}));
    EXPECT_DOUBLE_EQ(r.integer_std, 1.0);
}

TEST(Total, WeightedSumAndLinearity) {
    std::mt19937_64 rng(7);
    const auto a = random_image(rng, 16, 12);
    const auto b = random_image(rng, 16, 12);
    std::vector<double> soft(16 * 12);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (auto& v : soft) v = u(rng);
    const auto out = counts_output(16, 12, soft);
    const LossWeights w{0.47, 0.12, 0.41};
    const auto t = total_loss(a, b, out, w);
    EXPECT_NEAR(t.total, 0.47 * t.l1 + 0.12 * t.ssim_loss + 0.41 * t.load, 1e-12);
    EXPECT_DOUBLE_EQ(t.l1, l1_loss(a, b).value);
    EXPECT_DOUBLE_EQ(t.ssim_loss, ssim_loss(a, b).value);
    EXPECT_DOUBLE_EQ(t.load, load_balancing_loss(out).value);

    const auto t2 = total_loss(a, b, out, {0.94, 0.24, 0.82});
    EXPECT_NEAR(t2.total, 2.0 * t.total, 1e-12);

    const auto t0 = total_loss(a, b, out, {0.47, 0.12, 0.0});
    EXPECT_NEAR(t0.total, 0.47 * t.l1 + 0.12 * t.ssim_loss, 1e-12);
    EXPECT_TRUE(t0.dl_dsoft.empty());
    for (double v : {t.total, t.l1, t.ssim_loss, t.load}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
}

TEST(Total, IdenticalUniformIsZero) {
    std::mt19937_64 rng(8);
    const auto a = random_image(rng, 12, 12);
    const auto t = total_loss(a, a, counts_output(12, 12, std::vector<double>(144, 1.0)), {});
    EXPECT_NEAR(t.total, 0.0, 1e-14);
}

TEST(Psnr, Examples) {
    EXPECT_TRUE(std::isinf(psnr(Image(4, 4, 0.5), Image(4, 4, 0.5))));
    EXPECT_GT(psnr(Image(4, 4, 0.5), Image(4, 4, 0.5)), 0.0);
    EXPECT_NEAR(psnr(Image(4, 4, 0.0), Image(4, 4, 0.1)), 20.0, 1e-9);
    EXPECT_NEAR(psnr(Image(4, 4, 0.0), Image(4, 4, 1.0)), 0.0, 1e-12);
    EXPECT_THROW(psnr(Image(4, 4), Image(5, 4)), Error);
}
