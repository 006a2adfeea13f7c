// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/rasterizer.hpp"

#include "progsplat/error.hpp"
#include "progsplat/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace progsplat {

namespace {

/// Everything the projection of one Gaussian computes, kept so the backward
/// pass can replay the chain rule without storing it per splat.
struct Geometry {
    Vec3 t;           // camera-space mean
    bool clamp_x = false;
    bool clamp_y = false;
    double lim_x = 0.0; // active clamp bound when clamp_x
    double lim_y = 0.0;
    Eigen::Matrix<double, 2, 3> jw; // J * W
    Mat3 rot;                       // from normalized quaternion
    std::array<double, 4> qn{};
    double qnorm = 1.0;
    Vec3 scale;
    Mat3 sigma;
    Mat2 cov;
    Mat2 conic;
    Vec2 mean;
    double depth = 0.0;
    int radius = 0;
    Vec3 view_dir;   // unit vector from camera centre to mean
    double view_len = 1.0;
    std::array<double, sh::kMaxCoeffs> basis{};
    std::array<double, 3> rgb{};
    std::array<bool, 3> clamped{};
    double opacity = 0.0;
};

bool project_one(const Gaussian& g, int sh_degree, const CameraFrame& camera, const Vec3& cam_center, double near,
                 Geometry& out) {
    const Mat3& w = camera.pose.rotation;
    const Vec3 p(g.position[0], g.position[1], g.position[2]);
    out.t = w * p + camera.pose.translation;
    const double tz = out.t.z();
    if (!(tz > near)) return false;

    const double qn2 = g.rotation[0] * g.rotation[0] + g.rotation[1] * g.rotation[1] +
                       g.rotation[2] * g.rotation[2] + g.rotation[3] * g.rotation[3];
    if (!(qn2 > 0.0)) return false;
    out.qnorm = std::sqrt(qn2);
    for (int k = 0; k < 4; ++k) out.qn[k] = g.rotation[k] / out.qnorm;
    out.rot = rotation_from_quaternion(out.qn);
    out.scale = Vec3(std::exp(g.log_scale[0]), std::exp(g.log_scale[1]), std::exp(g.log_scale[2]));
    const Mat3 m = out.rot * out.scale.asDiagonal();
    out.sigma = m * m.transpose();

    const auto& k = camera.intrinsics;
    const double lim_x_hi = 1.3 * (camera.width - k.cx) / k.fx;
    const double lim_x_lo = -1.3 * k.cx / k.fx;
    const double lim_y_hi = 1.3 * (camera.height - k.cy) / k.fy;
    const double lim_y_lo = -1.3 * k.cy / k.fy;
    double xz = out.t.x() / tz;
    double yz = out.t.y() / tz;
    out.clamp_x = xz > lim_x_hi || xz < lim_x_lo;
    out.clamp_y = yz > lim_y_hi || yz < lim_y_lo;
    if (out.clamp_x) out.lim_x = xz > lim_x_hi ? lim_x_hi : lim_x_lo;
    if (out.clamp_y) out.lim_y = yz > lim_y_hi ? lim_y_hi : lim_y_lo;
    xz = out.clamp_x ? out.lim_x : xz;
    yz = out.clamp_y ? out.lim_y : yz;

    Eigen::Matrix<double, 2, 3> j;
    j << k.fx / tz, 0.0, -k.fx * xz / tz, 0.0, k.fy / tz, -k.fy * yz / tz;
    out.jw = j * w;
    out.cov = out.jw * out.sigma * out.jw.transpose();
    out.cov(0, 1) = out.cov(1, 0) = 0.5 * (out.cov(0, 1) + out.cov(1, 0));
    out.cov(0, 0) += kLowPassVariance;
    out.cov(1, 1) += kLowPassVariance;
    const double det = out.cov(0, 0) * out.cov(1, 1) - out.cov(0, 1) * out.cov(0, 1);
    if (!(det > 0.0)) return false;
    out.conic << out.cov(1, 1) / det, -out.cov(0, 1) / det, -out.cov(0, 1) / det, out.cov(0, 0) / det;

    const double mid = 0.5 * (out.cov(0, 0) + out.cov(1, 1));
    const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
    out.radius = static_cast<int>(std::ceil(3.0 * std::sqrt(lambda)));
    out.mean = Vec2(k.fx * out.t.x() / tz + k.cx, k.fy * out.t.y() / tz + k.cy);
    out.depth = tz;
    if (out.mean.x() + out.radius < 0.0 || out.mean.x() - out.radius > camera.width ||
        out.mean.y() + out.radius < 0.0 || out.mean.y() - out.radius > camera.height) {
        return false;
    }

    const Vec3 v = p - cam_center;
    out.view_len = v.norm();
    out.view_dir = out.view_len > 0.0 ? Vec3(v / out.view_len) : Vec3(0.0, 0.0, 1.0);
    out.basis = sh::basis(sh_degree, out.view_dir.x(), out.view_dir.y(), out.view_dir.z());
    const int coeffs = sh::coeff_count(sh_degree);
    for (int c = 0; c < 3; ++c) {
        double value = 0.5;
        for (int i = 0; i < coeffs; ++i) value += out.basis[i] * g.sh[i * 3 + c];
        out.clamped[c] = value < 0.0 || value > 1.0;
        out.rgb[c] = std::clamp(value, 0.0, 1.0);
    }
    out.opacity = sigmoid(g.opacity_logit);
    return true;
}

inline double splat_power(const ProjectedSplat& s, double px, double py, double& dx, double& dy) {
    dx = s.mean.x() - px;
    dy = s.mean.y() - py;
    return -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
}

inline double soft_indicator(double alpha, double temperature) {
    return 1.0 / (1.0 + std::exp(-(alpha - kAlphaMin) / temperature));
}

struct Grad2d {
    double u = 0.0, v = 0.0;
    double ca = 0.0, cb = 0.0, cc = 0.0;
    std::array<double, 3> rgb{};
    double opacity = 0.0;

    Grad2d& operator+=(const Grad2d& o) {
        u += o.u;
        v += o.v;
        ca += o.ca;
        cb += o.cb;
        cc += o.cc;
        for (int c = 0; c < 3; ++c) rgb[c] += o.rgb[c];
        opacity += o.opacity;
        return *this;
    }
};

/// Contribution of one (splat, pixel) pair given the pixel state in front of
/// and behind the splat.
inline void accumulate_pair(const ProjectedSplat& s, double alpha, double gauss, double t_before,
                            const double* behind, const double* dl_dc, double dl_dsoft, double temperature,
                            double dx, double dy, Grad2d& acc) {
    double dl_dalpha = 0.0;
    const double inv = 1.0 / (1.0 - alpha);
    for (int c = 0; c < 3; ++c) {
        acc.rgb[c] += alpha * t_before * dl_dc[c];
        dl_dalpha += dl_dc[c] * (s.rgb[c] * t_before - behind[c] * inv);
    }
    if (s.opacity * gauss > kAlphaMax) return; // alpha clamped: flat in every input
    double dl_dalpha_soft = 0.0;
    if (dl_dsoft != 0.0) {
        const double sg = soft_indicator(alpha, temperature);
        dl_dalpha_soft = dl_dsoft * sg * (1.0 - sg) / temperature;
    }
    acc.opacity += (dl_dalpha + dl_dalpha_soft) * gauss;
    const double dl_dpower = dl_dalpha * s.opacity * gauss;
    acc.u += dl_dpower * -(s.conic[0] * dx + s.conic[1] * dy);
    acc.v += dl_dpower * -(s.conic[2] * dy + s.conic[1] * dx);
    acc.ca += dl_dpower * -0.5 * dx * dx;
    acc.cb += dl_dpower * -dx * dy;
    acc.cc += dl_dpower * -0.5 * dy * dy;
}

inline void atomic_add(double& target, double value) {
    std::atomic_ref<double>(target).fetch_add(value, std::memory_order_relaxed);
}

void atomic_add(Grad2d& target, const Grad2d& g) {
    atomic_add(target.u, g.u);
    atomic_add(target.v, g.v);
    atomic_add(target.ca, g.ca);
    atomic_add(target.cb, g.cb);
    atomic_add(target.cc, g.cc);
    for (int c = 0; c < 3; ++c) atomic_add(target.rgb[c], g.rgb[c]);
    atomic_add(target.opacity, g.opacity);
}

CameraFrame camera_of(const RenderOutput& out) {
    CameraFrame cam;
    cam.width = out.width;
    cam.height = out.height;
    cam.intrinsics = out.intrinsics;
    cam.pose = out.pose;
    return cam;
}

struct TileRect {
    int x0, y0, x1, y1; // pixel bounds, exclusive upper
};

TileRect tile_rect(const RenderOutput& out, int tile) {
    const int tx = tile % out.tiles_x;
    const int ty = tile / out.tiles_x;
    return {tx * kTileSize, ty * kTileSize, std::min(out.width, (tx + 1) * kTileSize),
            std::min(out.height, (ty + 1) * kTileSize)};
}

std::vector<Grad2d> backward_splat_major(const RenderOutput& out, const Image& dl_dcolor,
                                         std::span<const double> dl_dsoft, int workers) {
    const int tiles = out.tiles_x * out.tiles_y;
    std::vector<Grad2d> entry_grads(out.tile_entries.size());
    const double tau = out.options.soft_temperature;
    const auto& bg = out.options.background;

    parallel_for(static_cast<std::size_t>(tiles), workers, [&](std::size_t begin, std::size_t end, int) {
        // Per (pixel, entry): transmittance in front, alpha (<0: not blended),
        // Gaussian falloff, colour behind.
        std::vector<double> t_front, alpha, gauss, behind;
        for (std::size_t tile = begin; tile < end; ++tile) {
            const std::uint32_t off = out.tile_offsets[tile];
            const std::uint32_t len = out.tile_offsets[tile + 1] - off;
            if (len == 0) continue;
            const TileRect r = tile_rect(out, static_cast<int>(tile));
            const int rw = r.x1 - r.x0;
            const std::size_t n = static_cast<std::size_t>(rw) * (r.y1 - r.y0) * len;
            t_front.assign(n, 0.0);
            alpha.assign(n, -1.0);
            gauss.assign(n, 0.0);
            behind.assign(n * 3, 0.0);

            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                    const std::size_t base = (static_cast<std::size_t>(y - r.y0) * rw + (x - r.x0)) * len;
                    const double px = x + 0.5, py = y + 0.5;
                    const std::uint32_t traversed = out.traversed[pix];
                    double t = 1.0;
                    for (std::uint32_t k = 0; k < traversed; ++k) {
                        const ProjectedSplat& s = out.splats[out.tile_entries[off + k]];
                        double dx, dy;
                        const double power = splat_power(s, px, py, dx, dy);
                        if (power > 0.0) continue;
                        const double gk = std::exp(power);
                        const double a = std::min(kAlphaMax, s.opacity * gk);
                        if (a <= kAlphaMin) continue;
                        t_front[base + k] = t;
                        alpha[base + k] = a;
                        gauss[base + k] = gk;
                        t *= 1.0 - a;
                    }
                    double acc[3] = {out.transmittance[pix] * bg[0], out.transmittance[pix] * bg[1],
                                     out.transmittance[pix] * bg[2]};
                    for (std::uint32_t k = traversed; k-- > 0;) {
                        const double a = alpha[base + k];
                        if (a < 0.0) continue;
                        const ProjectedSplat& s = out.splats[out.tile_entries[off + k]];
                        for (int c = 0; c < 3; ++c) {
                            behind[(base + k) * 3 + c] = acc[c];
                            acc[c] += s.rgb[c] * a * t_front[base + k];
                        }
                    }
                }
            }

            for (std::uint32_t k = 0; k < len; ++k) {
                const ProjectedSplat& s = out.splats[out.tile_entries[off + k]];
                Grad2d acc;
                for (int y = r.y0; y < r.y1; ++y) {
                    for (int x = r.x0; x < r.x1; ++x) {
                        const std::size_t slot = (static_cast<std::size_t>(y - r.y0) * rw + (x - r.x0)) * len + k;
                        const double a = alpha[slot];
                        if (a < 0.0) continue;
                        const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                        const double dx = s.mean.x() - (x + 0.5);
                        const double dy = s.mean.y() - (y + 0.5);
                        accumulate_pair(s, a, gauss[slot], t_front[slot], &behind[slot * 3],
                                        &dl_dcolor.data[pix * 3], dl_dsoft.empty() ? 0.0 : dl_dsoft[pix], tau, dx,
                                        dy, acc);
                    }
                }
                entry_grads[off + k] = acc;
            }
        }
    });

    // Fixed-order reduction: each splat sums its tile entries in tile order.
    std::vector<std::uint32_t> counts(out.splats.size() + 1, 0);
    for (std::uint32_t e : out.tile_entries) ++counts[e + 1];
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    std::vector<std::uint32_t> by_splat(out.tile_entries.size());
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t i = 0; i < out.tile_entries.size(); ++i) by_splat[cursor[out.tile_entries[i]]++] = i;

    std::vector<Grad2d> grads(out.splats.size());
    parallel_for(out.splats.size(), workers, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t s = begin; s < end; ++s) {
            Grad2d acc;
            for (std::uint32_t i = counts[s]; i < counts[s + 1]; ++i) acc += entry_grads[by_splat[i]];
            grads[s] = acc;
        }
    });
    return grads;
}

std::vector<Grad2d> backward_pixel_major(const RenderOutput& out, const Image& dl_dcolor,
                                         std::span<const double> dl_dsoft, int workers) {
    const int tiles = out.tiles_x * out.tiles_y;
    std::vector<Grad2d> grads(out.splats.size());
    const double tau = out.options.soft_temperature;
    const auto& bg = out.options.background;

    parallel_for(static_cast<std::size_t>(tiles), workers, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t tile = begin; tile < end; ++tile) {
            const std::uint32_t off = out.tile_offsets[tile];
            if (out.tile_offsets[tile + 1] == off) continue;
            const TileRect r = tile_rect(out, static_cast<int>(tile));
            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                    const double px = x + 0.5, py = y + 0.5;
                    double t = out.transmittance[pix];
                    double behind[3] = {t * bg[0], t * bg[1], t * bg[2]};
                    const double* dl_dc = &dl_dcolor.data[pix * 3];
                    const double dsoft = dl_dsoft.empty() ? 0.0 : dl_dsoft[pix];
                    for (std::uint32_t k = out.traversed[pix]; k-- > 0;) {
                        const std::uint32_t splat = out.tile_entries[off + k];
                        const ProjectedSplat& s = out.splats[splat];
                        double dx, dy;
                        const double power = splat_power(s, px, py, dx, dy);
                        if (power > 0.0) continue;
                        const double gk = std::exp(power);
                        const double a = std::min(kAlphaMax, s.opacity * gk);
                        if (a <= kAlphaMin) continue;
                        const double t_front = t / (1.0 - a);
                        Grad2d g;
                        accumulate_pair(s, a, gk, t_front, behind, dl_dc, dsoft, tau, dx, dy, g);
                        atomic_add(grads[splat], g);
                        for (int c = 0; c < 3; ++c) behind[c] += s.rgb[c] * a * t_front;
                        t = t_front;
                    }
                }
            }
        }
    });
    return grads;
}

} // namespace

std::vector<ProjectedSplat> project(const GaussianField& field, const CameraFrame& camera,
                                    const RenderOptions& options) {
    const Vec3 cam_center = camera.pose.camera_center();
    std::vector<ProjectedSplat> all(field.size());
    std::vector<std::uint8_t> keep(field.size(), 0);
    parallel_for(field.size(), options.workers, [&](std::size_t begin, std::size_t end, int) {
        Geometry geo;
        for (std::size_t i = begin; i < end; ++i) {
            if (!project_one(field.gaussians[i], field.sh_degree, camera, cam_center, options.near, geo)) continue;
            ProjectedSplat& s = all[i];
            s.source = static_cast<std::uint32_t>(i);
            s.mean = geo.mean;
            s.cov = geo.cov;
            s.conic = {geo.conic(0, 0), geo.conic(0, 1), geo.conic(1, 1)};
            s.depth = geo.depth;
            s.rgb = geo.rgb;
            s.rgb_clamped = geo.clamped;
            s.opacity = geo.opacity;
            s.radius = geo.radius;
            keep[i] = 1;
        }
    });
    std::vector<ProjectedSplat> splats;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (keep[i]) splats.push_back(all[i]);
    }
    std::stable_sort(splats.begin(), splats.end(), [](const ProjectedSplat& a, const ProjectedSplat& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.source < b.source);
    });
    return splats;
}

RenderOutput render_forward(std::vector<ProjectedSplat> splats, const CameraFrame& camera,
                            const RenderOptions& options) {
    RenderOutput out;
    out.width = camera.width;
    out.height = camera.height;
    out.intrinsics = camera.intrinsics;
    out.pose = camera.pose;
    out.options = options;
    out.splats = std::move(splats);
    out.tiles_x = (out.width + kTileSize - 1) / kTileSize;
    out.tiles_y = (out.height + kTileSize - 1) / kTileSize;
    const int tiles = out.tiles_x * out.tiles_y;

    // Bin: splats are already depth ordered, so appending in order keeps every
    // tile list sorted.
    auto tile_span = [&](const ProjectedSplat& s, int& x0, int& x1, int& y0, int& y1) {
        x0 = std::clamp(static_cast<int>(std::floor((s.mean.x() - s.radius) / kTileSize)), 0, out.tiles_x - 1);
        x1 = std::clamp(static_cast<int>(std::floor((s.mean.x() + s.radius) / kTileSize)), 0, out.tiles_x - 1);
        y0 = std::clamp(static_cast<int>(std::floor((s.mean.y() - s.radius) / kTileSize)), 0, out.tiles_y - 1);
        y1 = std::clamp(static_cast<int>(std::floor((s.mean.y() + s.radius) / kTileSize)), 0, out.tiles_y - 1);
    };
    std::vector<std::uint32_t> counts(tiles + 1, 0);
    for (const auto& s : out.splats) {
        int x0, x1, y0, y1;
        tile_span(s, x0, x1, y0, y1);
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) ++counts[ty * out.tiles_x + tx + 1];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    out.tile_offsets = counts;
    out.tile_entries.resize(counts.back());
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t i = 0; i < out.splats.size(); ++i) {
        int x0, x1, y0, y1;
        tile_span(out.splats[i], x0, x1, y0, y1);
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) out.tile_entries[cursor[ty * out.tiles_x + tx]++] = i;
    }

    const std::size_t pixels = static_cast<std::size_t>(out.width) * out.height;
    out.color = Image(out.width, out.height);
    out.transmittance.assign(pixels, 1.0);
    out.blended_count.assign(pixels, 0);
    out.soft_count.assign(pixels, 0.0);
    out.traversed.assign(pixels, 0);
    const auto& bg = options.background;
    const double tau = options.soft_temperature;

    parallel_for(static_cast<std::size_t>(tiles), options.workers, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t tile = begin; tile < end; ++tile) {
            const std::uint32_t off = out.tile_offsets[tile];
            const std::uint32_t stop = out.tile_offsets[tile + 1];
            const TileRect r = tile_rect(out, static_cast<int>(tile));
            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    const std::size_t pix = static_cast<std::size_t>(y) * out.width + x;
                    const double px = x + 0.5, py = y + 0.5;
                    double t = 1.0;
                    double c[3] = {0.0, 0.0, 0.0};
                    int count = 0;
                    double soft = 0.0;
                    std::uint32_t k = off;
                    for (; k < stop; ++k) {
                        const ProjectedSplat& s = out.splats[out.tile_entries[k]];
                        double dx, dy;
                        const double power = splat_power(s, px, py, dx, dy);
                        if (power > 0.0) continue;
                        const double a = std::min(kAlphaMax, s.opacity * std::exp(power));
                        if (a <= kAlphaMin) continue;
                        const double next_t = t * (1.0 - a);
                        if (next_t < kMinTransmittance) break;
                        for (int ch = 0; ch < 3; ++ch) c[ch] += s.rgb[ch] * a * t;
                        t = next_t;
                        ++count;
                        soft += soft_indicator(a, tau);
                    }
                    for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = c[ch] + t * bg[ch];
                    out.transmittance[pix] = t;
                    out.blended_count[pix] = count;
                    out.soft_count[pix] = soft;
                    out.traversed[pix] = k - off;
                }
            }
        }
    });
    return out;
}

RenderOutput render(const GaussianField& field, const CameraFrame& camera, const RenderOptions& options) {
    RenderOutput out = render_forward(project(field, camera, options), camera, options);
    out.generation = field.generation;
    out.field_size = field.size();
    return out;
}

Gradients render_backward(const GaussianField& field, const RenderOutput& out, const Image& dl_dcolor,
                          std::span<const double> dl_dsoft, const BackwardOptions& options) {
    if (out.generation != field.generation || out.field_size != field.size()) {
        fail(ErrorCode::ContractViolation, "render output is stale: the field changed since the forward pass");
    }
    if (dl_dcolor.width != out.width || dl_dcolor.height != out.height) {
        fail(ErrorCode::DimensionMismatch, "colour gradient does not match the rendered image");
    }
    if (!dl_dsoft.empty() && dl_dsoft.size() != out.soft_count.size()) {
        fail(ErrorCode::DimensionMismatch, "soft-count gradient does not match the rendered image");
    }

    const std::vector<Grad2d> g2d = options.mode == BackwardMode::SplatMajor
                                        ? backward_splat_major(out, dl_dcolor, dl_dsoft, options.workers)
                                        : backward_pixel_major(out, dl_dcolor, dl_dsoft, options.workers);

    Gradients grads;
    grads.params.assign(field.size(), Gaussian{});
    grads.mean2d_norm.assign(field.size(), 0.0);
    grads.visible.assign(field.size(), 0);

    const CameraFrame camera = camera_of(out);
    const Vec3 cam_center = camera.pose.camera_center();
    const Mat3& w = camera.pose.rotation;
    const auto& k = camera.intrinsics;
    const int coeffs = sh::coeff_count(field.sh_degree);

    parallel_for(out.splats.size(), options.workers, [&](std::size_t begin, std::size_t end, int) {
        Geometry geo;
        for (std::size_t si = begin; si < end; ++si) {
            const ProjectedSplat& s = out.splats[si];
            const Grad2d& g = g2d[si];
            const Gaussian& gauss = field.gaussians[s.source];
            Gaussian& d = grads.params[s.source];
            project_one(gauss, field.sh_degree, camera, cam_center, out.options.near, geo);
            grads.visible[s.source] = 1;
            grads.mean2d_norm[s.source] = std::hypot(g.u * 0.5 * out.width, g.v * 0.5 * out.height);

            d.opacity_logit = g.opacity * s.opacity * (1.0 - s.opacity);

            Vec3 dl_dp = Vec3::Zero();
            // Colour: SH coefficients and view direction.
            double dl_drgb[3];
            for (int c = 0; c < 3; ++c) dl_drgb[c] = s.rgb_clamped[c] ? 0.0 : g.rgb[c];
            if (dl_drgb[0] != 0.0 || dl_drgb[1] != 0.0 || dl_drgb[2] != 0.0) {
                for (int i = 0; i < coeffs; ++i) {
                    for (int c = 0; c < 3; ++c) d.sh[i * 3 + c] = geo.basis[i] * dl_drgb[c];
                }
                if (field.sh_degree > 0) {
                    const auto jac =
                        sh::basis_jacobian(field.sh_degree, geo.view_dir.x(), geo.view_dir.y(), geo.view_dir.z());
                    Vec3 dl_ddir = Vec3::Zero();
                    for (int i = 1; i < coeffs; ++i) {
                        double weight = 0.0;
                        for (int c = 0; c < 3; ++c) weight += gauss.sh[i * 3 + c] * dl_drgb[c];
                        dl_ddir += weight * Vec3(jac[i][0], jac[i][1], jac[i][2]);
                    }
                    dl_dp += (dl_ddir - geo.view_dir * geo.view_dir.dot(dl_ddir)) / geo.view_len;
                }
            }

            // Mean: u = fx tx / tz + cx, v = fy ty / tz + cy.
            const double tx = geo.t.x(), ty = geo.t.y(), tz = geo.t.z();
            Vec3 dl_dt(g.u * k.fx / tz, g.v * k.fy / tz,
                       -g.u * k.fx * tx / (tz * tz) - g.v * k.fy * ty / (tz * tz));

            // Conic -> 2D covariance -> (J W, Sigma).
            Mat2 gq;
            gq << g.ca, 0.5 * g.cb, 0.5 * g.cb, g.cc;
            const Mat2 gc = -geo.conic * gq * geo.conic;
            const Mat3 g_sigma = geo.jw.transpose() * gc * geo.jw;
            const Eigen::Matrix<double, 2, 3> g_jw = 2.0 * gc * geo.jw * geo.sigma;
            const Eigen::Matrix<double, 2, 3> g_j = g_jw * w.transpose();

            const double tz2 = tz * tz, tz3 = tz2 * tz;
            dl_dt.z() += g_j(0, 0) * (-k.fx / tz2) + g_j(1, 1) * (-k.fy / tz2);
            if (geo.clamp_x) {
                dl_dt.z() += g_j(0, 2) * (k.fx * geo.lim_x / tz2);
            } else {
                dl_dt.x() += g_j(0, 2) * (-k.fx / tz2);
                dl_dt.z() += g_j(0, 2) * (2.0 * k.fx * tx / tz3);
            }
            if (geo.clamp_y) {
                dl_dt.z() += g_j(1, 2) * (k.fy * geo.lim_y / tz2);
            } else {
                dl_dt.y() += g_j(1, 2) * (-k.fy / tz2);
                dl_dt.z() += g_j(1, 2) * (2.0 * k.fy * ty / tz3);
            }
            dl_dp += w.transpose() * dl_dt;
            for (int a = 0; a < 3; ++a) d.position[a] = dl_dp[a];

            // Sigma = M M^T, M = R diag(s).
            const Mat3 m = geo.rot * geo.scale.asDiagonal();
            const Mat3 g_m = 2.0 * g_sigma * m;
            Mat3 g_r;
            for (int j = 0; j < 3; ++j) {
                g_r.col(j) = g_m.col(j) * geo.scale[j];
                d.log_scale[j] = g_m.col(j).dot(geo.rot.col(j)) * geo.scale[j];
            }

            const double qw = geo.qn[0], qx = geo.qn[1], qy = geo.qn[2], qz = geo.qn[3];
            Mat3 dw, dx, dy, dz;
            dw << 0, -2 * qz, 2 * qy, 2 * qz, 0, -2 * qx, -2 * qy, 2 * qx, 0;
            dx << 0, 2 * qy, 2 * qz, 2 * qy, -4 * qx, -2 * qw, 2 * qz, 2 * qw, -4 * qx;
            dy << -4 * qy, 2 * qx, 2 * qw, 2 * qx, 0, 2 * qz, -2 * qw, 2 * qz, -4 * qy;
            dz << -4 * qz, -2 * qw, 2 * qx, 2 * qw, -4 * qz, 2 * qy, 2 * qx, 2 * qy, 0;
            const double gqn[4] = {g_r.cwiseProduct(dw).sum(), g_r.cwiseProduct(dx).sum(),
                                   g_r.cwiseProduct(dy).sum(), g_r.cwiseProduct(dz).sum()};
            const double proj = gqn[0] * qw + gqn[1] * qx + gqn[2] * qy + gqn[3] * qz;
            for (int i = 0; i < 4; ++i) d.rotation[i] = (gqn[i] - geo.qn[i] * proj) / geo.qnorm;
        }
    });
    return grads;
}

} // namespace progsplat
