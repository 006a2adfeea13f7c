// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"
#include "progsplat/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace progsplat {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kAlphaMax = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kLowPassVariance = 0.3;

struct RenderOptions {
    double near = 0.01;
    std::array<double, 3> background{0.0, 0.0, 0.0};
    int workers = 1;
    /// Temperature of the sigmoid indicator behind the differentiable
    /// per-pixel Gaussian count, in activated-opacity units.
    double soft_temperature = 0.01;
};

/// A Gaussian after projection into one camera. Pixel coordinates put the
/// centre of pixel (x, y) at (x + 0.5, y + 0.5).
struct ProjectedSplat {
    std::uint32_t source = 0;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity(); // includes the low-pass floor
    std::array<double, 3> conic{}; // inverse covariance entries (a, b, c) of [[a b][b c]]
    double depth = 0.0;
    std::array<double, 3> rgb{};
    std::array<bool, 3> rgb_clamped{};
    double opacity = 0.0;
    int radius = 0;
};

/// Culls Gaussians behind the near plane or whose 3-sigma footprint misses the
/// image, and returns the rest sorted by (depth, source index).
std::vector<ProjectedSplat> project(const GaussianField& field, const CameraFrame& camera, const RenderOptions& options);

struct RenderOutput {
    int width = 0;
    int height = 0;
    Image color;
    std::vector<double> transmittance;
    /// Number of splats blended into each pixel (alpha above kAlphaMin).
    std::vector<int> blended_count;
    /// Sum of sigmoid((alpha - kAlphaMin) / temperature) over the blended
    /// splats; kept in (blended_count / 2, blended_count].
    std::vector<double> soft_count;

    std::vector<ProjectedSplat> splats;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::uint32_t> tile_offsets; // tiles_x * tiles_y + 1
    std::vector<std::uint32_t> tile_entries; // indices into splats, depth-ordered per tile
    /// Per pixel, how many entries of its tile list were traversed before
    /// blending terminated.
    std::vector<std::uint32_t> traversed;

    Intrinsics intrinsics;
    Pose pose;
    RenderOptions options;
    std::uint64_t generation = 0;
    std::size_t field_size = 0;
};

/// Front-to-back alpha blending of depth-sorted splats, tile by tile.
RenderOutput render_forward(std::vector<ProjectedSplat> splats, const CameraFrame& camera, const RenderOptions& options);

/// project() followed by render_forward(), stamped with the field generation.
RenderOutput render(const GaussianField& field, const CameraFrame& camera, const RenderOptions& options);

enum class BackwardMode {
    /// Gradients accumulated per splat over the pixels it covers; no shared
    /// accumulators, deterministic reduction.
    SplatMajor,
    /// Reference: per pixel, back to front, scattering into shared per-splat
    /// accumulators with atomic adds.
    PixelMajor,
};

struct BackwardOptions {
    BackwardMode mode = BackwardMode::SplatMajor;
    int workers = 1;
};

struct Gradients {
    std::vector<Gaussian> params;
    /// |dL/d mean2d| in NDC units (pixel gradient scaled by W/2, H/2); the
    /// densification statistic.
    std::vector<double> mean2d_norm;
    std::vector<std::uint8_t> visible;
};

/// dl_dsoft may be empty (load-balancing term inactive). Its contribution is
/// routed to opacity logits only. Throws ContractViolation if the field changed
/// structurally since the forward pass.
Gradients render_backward(const GaussianField& field, const RenderOutput& output, const Image& dl_dcolor,
                          std::span<const double> dl_dsoft, const BackwardOptions& options);

} // namespace progsplat
