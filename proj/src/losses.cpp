// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/losses.hpp"

#include "progsplat/error.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace progsplat {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.data.size() != b.data.size()) {
        fail(ErrorCode::DimensionMismatch, std::string(what) + ": image dimensions differ");
    }
}

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Single-channel plane of size w x h.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
    double& at(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

/// Valid-mode separable correlation with the window.
Plane blur_valid(const Plane& in, const std::array<double, kSsimWindow>& k) {
    Plane tmp(in.w - kSsimWindow + 1, in.h);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in.at(x + i, y);
            tmp.at(x, y) = s;
        }
    Plane out(tmp.w, in.h - kSsimWindow + 1);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp.at(x, y + i);
            out.at(x, y) = s;
        }
    return out;
}

/// Adjoint of blur_valid: scatters a valid-size map back to full size.
Plane blur_adjoint(const Plane& in, int full_w, int full_h, const std::array<double, kSsimWindow>& k) {
    Plane tmp(in.w, full_h);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (int i = 0; i < kSsimWindow; ++i) tmp.at(x, y + i) += k[i] * in.at(x, y);
    Plane out(full_w, full_h);
    for (int y = 0; y < full_h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (int i = 0; i < kSsimWindow; ++i) out.at(x + i, y) += k[i] * tmp.at(x, y);
    return out;
}

Plane channel(const Image& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p.at(x, y) = img.at(x, y, c);
    return p;
}

Plane product(const Plane& a, const Plane& b) {
    Plane p(a.w, a.h);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = a.v[i] * b.v[i];
    return p;
}

/// Mean SSIM and, when grad is non-null, its gradient w.r.t. a.
double ssim_impl(const Image& a, const Image& b, Image* grad) {
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        fail(ErrorCode::DimensionMismatch, "ssim: image smaller than the 11x11 window");
    }
    const auto k = gaussian_window();
    const int vw = a.width - kSsimWindow + 1;
    const int vh = a.height - kSsimWindow + 1;
    const double n = 3.0 * vw * vh;
    double total = 0.0;
    if (grad) *grad = Image(a.width, a.height);

    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c);
        const Plane y = channel(b, c);
        const Plane mx = blur_valid(x, k);
        const Plane my = blur_valid(y, k);
        const Plane exx = blur_valid(product(x, x), k);
        const Plane eyy = blur_valid(product(y, y), k);
        const Plane exy = blur_valid(product(x, y), k);
        Plane g_mu(vw, vh), g_xx(vw, vh), g_xy(vw, vh);
        for (std::size_t i = 0; i < mx.v.size(); ++i) {
            const double ux = mx.v[i], uy = my.v[i];
            const double a1 = 2.0 * ux * uy + kSsimC1;
            const double a2 = 2.0 * (exy.v[i] - ux * uy) + kSsimC2;
            const double b1 = ux * ux + uy * uy + kSsimC1;
            const double b2 = (exx.v[i] - ux * ux) + (eyy.v[i] - uy * uy) + kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad) {
                g_mu.v[i] = s * (2.0 * uy / a1 - 2.0 * uy / a2 - 2.0 * ux / b1 + 2.0 * ux / b2) / n;
                g_xx.v[i] = s * (-1.0 / b2) / n;
                g_xy.v[i] = s * (2.0 / a2) / n;
            }
        }
        if (grad) {
            const Plane bm = blur_adjoint(g_mu, a.width, a.height, k);
            const Plane bxx = blur_adjoint(g_xx, a.width, a.height, k);
            const Plane bxy = blur_adjoint(g_xy, a.width, a.height, k);
            for (int py = 0; py < a.height; ++py)
                for (int px = 0; px < a.width; ++px) {
                    grad->at(px, py, c) =
                        bm.at(px, py) + 2.0 * x.at(px, py) * bxx.at(px, py) + y.at(px, py) * bxy.at(px, py);
                }
        }
    }
    return total / n;
}

} // namespace

ScalarWithGrad l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    ScalarWithGrad out;
    out.grad = Image(rendered.width, rendered.height);
    const double n = static_cast<double>(rendered.data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        out.grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.value = n > 0 ? sum / n : 0.0;
    return out;
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    return ssim_impl(a, b, nullptr);
}

ScalarWithGrad ssim_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "ssim_loss");
    ScalarWithGrad out;
    Image g;
    out.value = 1.0 - ssim_impl(rendered, target, &g);
    for (auto& v : g.data) v = -v;
    out.grad = std::move(g);
    return out;
}

double population_std(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

LoadLoss load_balancing_loss(const RenderOutput& output) {
    LoadLoss out;
    const auto& soft = output.soft_count;
    const std::size_t n = soft.size();
    out.grad.assign(n, 0.0);
    if (n == 0) return out;
    std::vector<double> counts(output.blended_count.begin(), output.blended_count.end());
    out.integer_std = population_std(counts);

    double mean = 0.0;
    for (double v : soft) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : soft) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    out.value = std::sqrt(var);
    if (out.value > 0.0) {
        for (std::size_t i = 0; i < n; ++i) out.grad[i] = (soft[i] - mean) / (static_cast<double>(n) * out.value);
    }
    return out;
}

LossBreakdown total_loss(const Image& rendered, const Image& target, const RenderOutput& output,
                         const LossWeights& weights) {
    for (double w : {weights.l1, weights.ssim, weights.load}) {
        if (!std::isfinite(w) || w < 0.0) fail(ErrorCode::InvalidParameter, "loss weights must be finite and >= 0");
    }
    LossBreakdown out;
    const ScalarWithGrad l1 = l1_loss(rendered, target);
    const ScalarWithGrad ss = ssim_loss(rendered, target);
    const LoadLoss load = load_balancing_loss(output);
    out.l1 = l1.value;
    out.ssim_loss = ss.value;
    out.load = load.value;
    out.load_integer_std = load.integer_std;
    out.total = weights.l1 * out.l1 + weights.ssim * out.ssim_loss + weights.load * out.load;
    out.dl_dcolor = Image(rendered.width, rendered.height);
    for (std::size_t i = 0; i < out.dl_dcolor.data.size(); ++i) {
        out.dl_dcolor.data[i] = weights.l1 * l1.grad.data[i] + weights.ssim * ss.grad.data[i];
    }
    if (weights.load > 0.0) {
        out.dl_dsoft = load.grad;
        for (auto& v : out.dl_dsoft) v *= weights.load;
    }
    return out;
}

double psnr(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(rendered.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace progsplat
