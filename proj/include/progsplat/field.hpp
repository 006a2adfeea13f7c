// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/sh.hpp"
#include "progsplat/spatial_index.hpp"
#include "progsplat/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace progsplat {

/// One anisotropic Gaussian in raw (pre-activation) parameter space. A
/// value-initialized Gaussian is all zeros, which is also how gradient
/// accumulators are represented.
struct Gaussian {
    std::array<double, 3> position{};
    std::array<double, 4> rotation{}; // w, x, y, z; normalized on use
    std::array<double, 3> log_scale{};
    double opacity_logit = 0.0;
    std::array<double, sh::kMaxCoeffs * 3> sh{}; // [coeff * 3 + channel]

    static constexpr int kParamCount = 3 + 4 + 3 + 1 + sh::kMaxCoeffs * 3;

    /// Flat access in declaration order: position, rotation, log_scale,
    /// opacity_logit, sh.
    double& param(int k);
    double param(int k) const;
};

enum class ParamClass { Position, Rotation, Scale, Opacity, Sh };
ParamClass param_class(int k);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

struct GaussianField {
    int sh_degree = 0;
    std::vector<Gaussian> gaussians;
    /// Bumped on every structural change (insert, densify, prune).
    std::uint64_t generation = 0;

    std::size_t size() const { return gaussians.size(); }
    bool all_finite() const;
};

struct SparsePoint {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
};

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 rotation_from_quaternion(const std::array<double, 4>& q);

/// R * S * S^T * R^T with S = diag(exp(log_scale)). Throws InvalidParameter on
/// a zero-norm quaternion.
Mat3 covariance_from_params(const std::array<double, 4>& rotation, const std::array<double, 3>& log_scale);

/// Candidates whose nearest existing point is strictly farther than threshold.
/// An empty index admits every candidate.
std::vector<SparsePoint> filter_new_points(const SpatialIndex& existing, std::span<const SparsePoint> candidates,
                                           double threshold);

/// Median nearest-neighbour spacing of a point set; 0 with fewer than two points.
double median_nn_spacing(const SpatialIndex& index);

struct InsertOptions {
    double init_opacity = 0.1;
    /// Scale used when a point has no usable neighbours.
    double fallback_scale = 0.01;
};

struct Diagnostics {
    std::size_t skipped_points = 0;
    std::vector<std::string> messages;
};

/// Appends one Gaussian per finite point. Scale is isotropic, the mean distance
/// to the 3 nearest existing or newly inserted positions.
std::size_t insert_points(GaussianField& field, std::span<const SparsePoint> points, const InsertOptions& options = {},
                          Diagnostics* diagnostics = nullptr);

struct DensifyOptions {
    double grad_threshold = 0.0002;
    double percent_dense = 0.01;
    double scene_extent = 1.0;
    double prune_opacity = 0.005;
    double split_scale_divisor = 1.6;
    int split_count = 2;
};

struct DensifySummary {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    /// For every Gaussian in the updated field, its index before the call, or
    /// -1 when it was created by cloning/splitting.
    std::vector<std::ptrdiff_t> origin;

    bool changed() const { return cloned + split + pruned > 0; }
};

DensifySummary densify_and_prune(GaussianField& field, std::span<const double> grad_stats, const DensifyOptions& options,
                                 std::mt19937_64& rng);

} // namespace progsplat
