// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/synthetic.hpp"

#include "progsplat/error.hpp"
#include "progsplat/ppm.hpp"
#include "progsplat/rasterizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace progsplat {

namespace {

constexpr double kCameraDistance = 4.0;

Pose look_at(const Vec3& center, const Vec3& target) {
    const Vec3 forward = (target - center).normalized();
    const Vec3 down_hint(0.0, 1.0, 0.0);
    const Vec3 right = down_hint.cross(forward).normalized();
    const Vec3 down = forward.cross(right);
    Pose pose;
    pose.rotation.row(0) = right.transpose();
    pose.rotation.row(1) = down.transpose();
    pose.rotation.row(2) = forward.transpose();
    pose.translation = -pose.rotation * center;
    return pose;
}

bool sees(const CameraFrame& f, const Vec3& p) {
    const Vec3 c = f.pose.rotation * p + f.pose.translation;
    if (c.z() < 0.1) return false;
    const double u = f.intrinsics.fx * c.x() / c.z() + f.intrinsics.cx;
    const double v = f.intrinsics.fy * c.y() / c.z() + f.intrinsics.cy;
    return u >= 0.0 && u < f.width && v >= 0.0 && v < f.height;
}

std::string view_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "view_%03d.ppm", i);
    return buf;
}

} // namespace

SyntheticScene make_synthetic_scene(const SyntheticOptions& options) {
    if (options.blobs < 1 || options.views < 2 || options.width < 1 || options.height < 1 ||
        options.points_per_blob < 1) {
        fail(ErrorCode::InvalidParameter, "synthetic scene options out of range");
    }
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    std::normal_distribution<double> normal(0.0, 1.0);

    SyntheticScene scene;
    scene.truth.sh_degree = 0;
    std::vector<Vec3> colors;
    for (int b = 0; b < options.blobs; ++b) {
        Gaussian g;
        g.position = {uniform(-options.half_length, options.half_length), uniform(-options.half_height, options.half_height), uniform(-0.6, 0.6)};
        double qn = 0.0;
        for (auto& q : g.rotation) {
            q = normal(rng);
            qn += q * q;
        }
        for (auto& q : g.rotation) q /= std::sqrt(qn);
        for (auto& s : g.log_scale) s = std::log(uniform(options.scale_min, options.scale_max));
        g.opacity_logit = logit(uniform(0.7, 0.95));
        const Vec3 rgb(uniform(0.15, 0.95), uniform(0.15, 0.95), uniform(0.15, 0.95));
        for (int c = 0; c < 3; ++c) g.sh[c] = sh::rgb_to_dc(rgb[c]);
        colors.push_back(rgb);
        scene.truth.gaussians.push_back(g);
    }

    SceneBundle& bundle = scene.bundle;
    const double focal = 0.9 * options.width;
    for (int i = 0; i < options.views; ++i) {
        const double s = static_cast<double>(i) / (options.views - 1);
        const double x = -options.half_length + 2.0 * options.half_length * s;
        const Vec3 center(x, 0.4 * std::sin(1.7 * i), -kCameraDistance);
        CameraFrame f;
        f.image_id = i + 1;
        f.name = view_name(i);
        f.width = options.width;
        f.height = options.height;
        f.intrinsics = {focal, focal, options.width / 2.0, options.height / 2.0};
        f.pose = look_at(center, Vec3(0.85 * x, 0.0, 0.0));
        f.pixels = render(scene.truth, f, RenderOptions{}).color;
        bundle.frames.push_back(std::move(f));
    }

    std::int64_t next_id = 1;
    for (int b = 0; b < options.blobs; ++b) {
        const Gaussian& g = scene.truth.gaussians[b];
        for (int k = 0; k < options.points_per_blob; ++k) {
            ScenePoint p;
            p.id = next_id++;
            for (int a = 0; a < 3; ++a) p.position[a] = g.position[a] + 0.5 * std::exp(g.log_scale[a]) * normal(rng);
            p.color = colors[b];
            for (const auto& f : bundle.frames) {
                if (sees(f, p.position)) p.track.push_back(f.image_id);
            }
            if (p.track.empty()) continue;
            const std::size_t index = bundle.points.size();
            for (std::size_t a = 0; a < p.track.size(); ++a) {
                bundle.image_points[p.track[a]].push_back(index);
                for (std::size_t c = a + 1; c < p.track.size(); ++c) ++bundle.matches[{p.track[a], p.track[c]}];
            }
            bundle.points.push_back(std::move(p));
        }
    }
    for (auto& f : bundle.frames) {
        const auto it = bundle.image_points.find(f.image_id);
        f.feature_count = it == bundle.image_points.end() ? 0 : static_cast<int>(it->second.size());
    }

    // Every sixth view (offset 3) is held out; the rest replay in sweep order.
    for (int i = 0; i < options.views; ++i) {
        if (i % 6 == 3) {
            scene.holdout.push_back(view_name(i));
        } else {
            scene.replay_names.push_back(view_name(i));
            bundle.replay_order.push_back(i + 1);
        }
    }
    return scene;
}

void write_synthetic_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
    write_colmap_text(scene.bundle, dir);
    std::filesystem::create_directories(dir / "images");
    for (const auto& f : scene.bundle.frames) write_ppm(f.pixels, dir / "images" / f.name);
    auto write_list = [&](const char* name, const std::vector<std::string>& items) {
        std::ofstream out(dir / name);
        for (const auto& s : items) out << s << '\n';
        if (!out) fail(ErrorCode::Io, "cannot write " + (dir / name).string());
    };
    write_list("order.txt", scene.replay_names);
    write_list("holdout.txt", scene.holdout);
}

} // namespace progsplat
