// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/rasterizer.hpp"
#include "progsplat/types.hpp"

#include <span>
#include <vector>

namespace progsplat {

struct ScalarWithGrad {
    double value = 0.0;
    Image grad;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean absolute per-channel difference.
ScalarWithGrad l1_loss(const Image& rendered, const Image& target);

/// Mean SSIM over every position where the full 11x11 window fits.
double ssim(const Image& a, const Image& b);

/// 1 - ssim(rendered, target), with gradient w.r.t. rendered.
ScalarWithGrad ssim_loss(const Image& rendered, const Image& target);

double population_std(std::span<const double> values);

struct LoadLoss {
    double value = 0.0;       // std of the soft count
    double integer_std = 0.0; // std of the integer blended count
    std::vector<double> grad; // dL/d soft_count per pixel
};

LoadLoss load_balancing_loss(const RenderOutput& output);

struct LossWeights {
    double l1 = 0.47;
    double ssim = 0.12;
    double load = 0.41;
};

struct LossBreakdown {
    double l1 = 0.0;
    double ssim_loss = 0.0;
    double load = 0.0;
    double load_integer_std = 0.0;
    double total = 0.0;
    Image dl_dcolor;
    /// Empty when the load weight is zero.
    std::vector<double> dl_dsoft;
};

LossBreakdown total_loss(const Image& rendered, const Image& target, const RenderOutput& output,
                         const LossWeights& weights);

/// 10 log10(1 / MSE); +inf for identical images.
double psnr(const Image& rendered, const Image& target);

} // namespace progsplat
