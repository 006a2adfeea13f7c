// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/field.hpp"

#include "progsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace progsplat {

double& Gaussian::param(int k) {
    if (k < 3) return position[k];
    k -= 3;
    if (k < 4) return rotation[k];
    k -= 4;
    if (k < 3) return log_scale[k];
    k -= 3;
    if (k == 0) return opacity_logit;
    return sh[k - 1];
}

double Gaussian::param(int k) const { return const_cast<Gaussian*>(this)->param(k); }

ParamClass param_class(int k) {
    if (k < 3) return ParamClass::Position;
    if (k < 7) return ParamClass::Rotation;
    if (k < 10) return ParamClass::Scale;
    if (k == 10) return ParamClass::Opacity;
    return ParamClass::Sh;
}

bool GaussianField::all_finite() const {
    for (const auto& g : gaussians) {
        for (int k = 0; k < Gaussian::kParamCount; ++k) {
            if (!std::isfinite(g.param(k))) return false;
        }
    }
    return true;
}

Mat3 rotation_from_quaternion(const std::array<double, 4>& q) {
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(norm > 0.0) || !std::isfinite(norm)) fail(ErrorCode::InvalidParameter, "zero-norm rotation quaternion");
    const double w = q[0] / norm, x = q[1] / norm, y = q[2] / norm, z = q[3] / norm;
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance_from_params(const std::array<double, 4>& rotation, const std::array<double, 3>& log_scale) {
    const Mat3 r = rotation_from_quaternion(rotation);
    const Vec3 s(std::exp(log_scale[0]), std::exp(log_scale[1]), std::exp(log_scale[2]));
    const Mat3 m = r * s.asDiagonal();
    Mat3 cov = m * m.transpose();
    // Exact symmetry regardless of summation order.
    cov = 0.5 * (cov + cov.transpose()).eval();
    return cov;
}

std::vector<SparsePoint> filter_new_points(const SpatialIndex& existing, std::span<const SparsePoint> candidates,
                                           double threshold) {
    if (!(threshold > 0.0)) fail(ErrorCode::InvalidParameter, "novelty threshold must be positive");
    std::vector<SparsePoint> out;
    for (const auto& p : candidates) {
        if (existing.nearest_distance(p.position) > threshold) out.push_back(p);
    }
    return out;
}

double median_nn_spacing(const SpatialIndex& index) {
    if (index.size() < 2) return 0.0;
    std::vector<double> spacing;
    spacing.reserve(index.size());
    for (const auto& p : index.points()) {
        const auto nn = index.k_nearest(p, 2);
        // nn[0] is the point itself (or a duplicate at distance 0).
        spacing.push_back(nn.size() > 1 ? nn[1].distance : 0.0);
    }
    const std::size_t mid = spacing.size() / 2;
    std::nth_element(spacing.begin(), spacing.begin() + mid, spacing.end());
    return spacing[mid];
}

std::size_t insert_points(GaussianField& field, std::span<const SparsePoint> points, const InsertOptions& options,
                          Diagnostics* diagnostics) {
    std::vector<const SparsePoint*> accepted;
    for (const auto& p : points) {
        if (p.position.allFinite() && p.color.allFinite()) {
            accepted.push_back(&p);
        } else if (diagnostics) {
            ++diagnostics->skipped_points;
            diagnostics->messages.push_back("skipped non-finite sparse point");
        }
    }
    if (accepted.empty()) return 0;

    const std::size_t existing = field.size();
    std::vector<Vec3> positions;
    positions.reserve(existing + accepted.size());
    for (const auto& g : field.gaussians) positions.emplace_back(g.position[0], g.position[1], g.position[2]);
    for (const auto* p : accepted) positions.push_back(p->position);
    const SpatialIndex index(positions);

    const double opacity_logit = logit(options.init_opacity);
    field.gaussians.reserve(existing + accepted.size());
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        const SparsePoint& p = *accepted[i];
        const std::size_t self = existing + i;
        double sum = 0.0;
        int n = 0;
        for (const auto& nb : index.k_nearest(p.position, 4)) {
            if (nb.index == self || n == 3) continue;
            sum += nb.distance;
            ++n;
        }
        double scale = n > 0 ? sum / n : 0.0;
        if (!(scale > 1e-12)) scale = options.fallback_scale;

        Gaussian g;
        g.position = {p.position.x(), p.position.y(), p.position.z()};
        g.rotation = {1.0, 0.0, 0.0, 0.0};
        const double log_s = std::log(scale);
        g.log_scale = {log_s, log_s, log_s};
        g.opacity_logit = opacity_logit;
        for (int c = 0; c < 3; ++c) g.sh[c] = sh::rgb_to_dc(p.color[c]);
        field.gaussians.push_back(g);
    }
    ++field.generation;
    return accepted.size();
}

DensifySummary densify_and_prune(GaussianField& field, std::span<const double> grad_stats, const DensifyOptions& options,
                                 std::mt19937_64& rng) {
    if (grad_stats.size() != field.size()) {
        fail(ErrorCode::DimensionMismatch, "gradient statistics do not match field size");
    }
    DensifySummary summary;
    const double extent_limit = options.percent_dense * options.scene_extent;
    const double shrink = std::log(options.split_scale_divisor);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Gaussian> kept;
    std::vector<std::ptrdiff_t> origin;
    std::vector<Gaussian> fresh;
    kept.reserve(field.size());

    for (std::size_t i = 0; i < field.size(); ++i) {
        const Gaussian& g = field.gaussians[i];
        const bool hot = grad_stats[i] >= options.grad_threshold;
        const double max_scale = std::exp(*std::max_element(g.log_scale.begin(), g.log_scale.end()));
        if (hot && max_scale > extent_limit) {
            const Mat3 r = rotation_from_quaternion(g.rotation);
            const Vec3 s(std::exp(g.log_scale[0]), std::exp(g.log_scale[1]), std::exp(g.log_scale[2]));
            for (int k = 0; k < options.split_count; ++k) {
                const Vec3 sample(normal(rng) * s.x(), normal(rng) * s.y(), normal(rng) * s.z());
                const Vec3 offset = r * sample;
                Gaussian child = g;
                for (int a = 0; a < 3; ++a) {
                    child.position[a] += offset[a];
                    child.log_scale[a] -= shrink;
                }
                fresh.push_back(child);
            }
            ++summary.split;
            continue;
        }
        kept.push_back(g);
        origin.push_back(static_cast<std::ptrdiff_t>(i));
        if (hot) {
            fresh.push_back(g);
            ++summary.cloned;
        }
    }
    for (const auto& g : fresh) {
        kept.push_back(g);
        origin.push_back(-1);
    }

    std::vector<Gaussian> survivors;
    survivors.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (sigmoid(kept[i].opacity_logit) < options.prune_opacity) {
            ++summary.pruned;
            continue;
        }
        survivors.push_back(kept[i]);
        summary.origin.push_back(origin[i]);
    }
    field.gaussians = std::move(survivors);
    if (summary.changed()) ++field.generation;
    return summary;
}

} // namespace progsplat
