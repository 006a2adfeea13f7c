// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"
#include "progsplat/losses.hpp"
#include "progsplat/overlap.hpp"
#include "progsplat/rasterizer.hpp"
#include "progsplat/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <vector>

namespace progsplat::testing {

inline CameraFrame make_camera(int width, int height, double focal, const Vec3& translation = Vec3(0, 0, 3)) {
    CameraFrame cam;
    cam.image_id = 1;
    cam.width = width;
    cam.height = height;
    cam.intrinsics = {focal, focal, width / 2.0, height / 2.0};
    cam.pose.translation = translation;
    cam.pixels = Image(width, height);
    cam.feature_count = 100;
    return cam;
}

struct SceneSpec {
    int count = 10;
    int sh_degree = 3;
    double spread = 0.45;
    double scale_min = 0.08;
    double scale_max = 0.18;
    double opacity_min = 0.2;
    double opacity_max = 0.85;
};

/// Gaussians scattered around the origin, in front of a camera at z = -3.
inline GaussianField random_field(std::mt19937_64& rng, const SceneSpec& spec) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> scale(spec.scale_min, spec.scale_max);
    std::uniform_real_distribution<double> opacity(spec.opacity_min, spec.opacity_max);
    GaussianField field;
    field.sh_degree = spec.sh_degree;
    for (int i = 0; i < spec.count; ++i) {
        Gaussian g;
        g.position = {spec.spread * u(rng), spec.spread * u(rng), 0.4 * u(rng)};
        g.rotation = {1.0 + 0.2 * u(rng), 0.4 * u(rng), 0.4 * u(rng), 0.4 * u(rng)};
        g.log_scale = {std::log(scale(rng)), std::log(scale(rng)), std::log(scale(rng))};
        g.opacity_logit = logit(opacity(rng));
        const int coeffs = sh::coeff_count(spec.sh_degree);
        for (int k = 0; k < 3; ++k) g.sh[k] = 0.6 * u(rng);
        for (int k = 3; k < coeffs * 3; ++k) g.sh[k] = 0.15 * u(rng);
        field.gaussians.push_back(g);
    }
    return field;
}

inline Image random_image(std::mt19937_64& rng, int width, int height) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image image(width, height);
    for (auto& v : image.data) v = u(rng);
    return image;
}

/// |a - b| / max(|a|, |b|), or 0 when both are within the absolute floor.
inline double relative_error(double a, double b, double floor = 1e-8) {
    const double diff = std::abs(a - b);
    if (diff <= floor) return 0.0;
    return diff / std::max(std::abs(a), std::abs(b));
}

/// Central difference of loss(field) with respect to one raw parameter.
inline double central_difference(const GaussianField& field, std::size_t index, int param, double h,
                                 const std::function<double(const GaussianField&)>& loss) {
    GaussianField plus = field;
    GaussianField minus = field;
    plus.gaussians[index].param(param) += h;
    minus.gaussians[index].param(param) -= h;
    return (loss(plus) - loss(minus)) / (2.0 * h);
}

/// Independent layered weight evaluation over a dense matrix of normalized
/// overlaps. Layers are recomputed by repeated relaxation rather than a queue.
inline std::vector<double> brute_force_weights(const std::vector<std::vector<double>>& m, std::size_t source,
                                               int max_layer) {
    const std::size_t n = m.size();
    constexpr int inf = std::numeric_limits<int>::max();
    std::vector<int> layer(n, inf);
    layer[source] = 1;
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j && m[i][j] > 0.0 && layer[j] != inf && layer[j] + 1 < layer[i]) {
                    layer[i] = layer[j] + 1;
                    changed = true;
                }
            }
        }
    }
    std::vector<double> w(n, 0.0);
    w[source] = 1.0;
    for (int k = 2; k <= max_layer; ++k) {
        double prev_count = 0.0;
        for (std::size_t j = 0; j < n; ++j) prev_count += layer[j] == k - 1 ? 1.0 : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (layer[i] != k) continue;
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (layer[j] == k - 1) sum += w[j] * m[j][i];
            }
            w[i] = sum / prev_count;
        }
    }
    return w;
}

struct RandomGraph {
    MatchMatrix matrix;
    std::vector<std::vector<double>> normalized;
    std::vector<ImageId> ids;
};

/// Random sparse overlap graph; ids are 1-based in registration order.
inline RandomGraph random_graph(std::mt19937_64& rng, int images, double edge_probability) {
    RandomGraph g;
    std::uniform_int_distribution<int> features(50, 400);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> fc(images);
    for (int i = 0; i < images; ++i) {
        fc[i] = features(rng);
        g.ids.push_back(i + 1);
        g.matrix.register_image(i + 1, fc[i]);
    }
    g.normalized.assign(images, std::vector<double>(images, 0.0));
    for (int i = 0; i < images; ++i) {
        for (int j = i + 1; j < images; ++j) {
            if (u(rng) >= edge_probability) continue;
            const int limit = std::min(fc[i], fc[j]);
            const int raw = std::uniform_int_distribution<int>(1, limit + limit / 4)(rng);
            g.matrix.set_matches(i + 1, j + 1, raw);
            const double v = std::min(1.0, static_cast<double>(raw) / limit);
            g.normalized[i][j] = g.normalized[j][i] = v;
        }
    }
    return g;
}

/// Real-valued local allocation: (1 - e^-w_i) / (2 sum (1 - e^-w_j)) * T_I.
inline std::vector<double> real_allocation(const std::vector<double>& weights, int iterations_per_event) {
    double denom = 0.0;
    for (double w : weights) denom += 1.0 - std::exp(-w);
    std::vector<double> out;
    for (double w : weights) out.push_back((1.0 - std::exp(-w)) / (2.0 * denom) * iterations_per_event);
    return out;
}

/// Direct-summation SSIM: every 11x11 window evaluated in full, no separable
/// filtering, averaged over valid positions and channels.
inline double reference_ssim(const Image& a, const Image& b) {
    constexpr int r = 5;
    double kernel[11][11];
    double total = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            kernel[y + r][x + r] = std::exp(-(x * x + y * y) / (2.0 * 1.5 * 1.5));
            total += kernel[y + r][x + r];
        }
    }
    const double c1 = 0.0001, c2 = 0.0009;
    double sum = 0.0;
    int n = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y = r; y < a.height - r; ++y) {
            for (int x = r; x < a.width - r; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = -r; dy <= r; ++dy) {
                    for (int dx = -r; dx <= r; ++dx) {
                        const double k = kernel[dy + r][dx + r] / total;
                        const double va = a.at(x + dx, y + dy, c), vb = b.at(x + dx, y + dy, c);
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++n;
            }
        }
    }
    return sum / n;
}

} // namespace progsplat::testing
