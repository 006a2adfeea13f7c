// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

// Command-line front end; talks to the library only through the C API.

#include "progsplat/progsplat.h"

#include "CLI11.hpp"

#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
    int exit_code;
};

void check(ps_status status, const char* what) {
    if (status == PS_OK) return;
    std::fprintf(stderr, "progsplat: %s: %s (%s)\n", what, ps_last_error(), ps_status_name(status));
    throw Failure{status == PS_CONFIG ? kExitUsage : kExitRuntime};
}

struct ConfigDeleter {
    void operator()(ps_config* c) const { ps_config_destroy(c); }
};
struct SceneDeleter {
    void operator()(ps_scene* s) const { ps_scene_destroy(s); }
};
struct FieldDeleter {
    void operator()(ps_field* f) const { ps_field_destroy(f); }
};

std::unique_ptr<ps_scene, SceneDeleter> load_scene(const std::string& dir, const std::string& images, int downscale) {
    ps_scene* raw = nullptr;
    check(ps_scene_load(dir.c_str(), images.c_str(), downscale, &raw), "loading scene");
    return std::unique_ptr<ps_scene, SceneDeleter>(raw);
}

std::unique_ptr<ps_field, FieldDeleter> load_field(const std::string& path) {
    ps_field* raw = nullptr;
    check(ps_field_load(path.c_str(), &raw), "loading field");
    return std::unique_ptr<ps_field, FieldDeleter>(raw);
}

ps_camera parse_camera(const std::string& spec) {
    std::vector<double> v;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--camera", "bad number '" + item + "'");
        }
    }
    if (v.size() != 13) throw CLI::ValidationError("--camera", "expected W,H,fx,fy,cx,cy,qw,qx,qy,qz,tx,ty,tz");
    return ps_camera{static_cast<int>(v[0]), static_cast<int>(v[1]), v[2], v[3], v[4], v[5], v[6],
                     v[7],                   v[8],                   v[9], v[10], v[11], v[12]};
}

void print_event(const char* line, void*) { std::printf("%s\n", line); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"progressive Gaussian-splatting trainer"};
    app.require_subcommand(1);

    std::string scene_dir, images_dir, order_file, config_file, out_dir, ablate, holdout_file, refined_file;
    std::string ply_file, camera_spec, out_file;
    std::uint64_t seed = 0;
    int downscale = 1;
    bool quiet = false;

    auto* train = app.add_subcommand("train", "replay a scene progressively and train");
    train->add_option("--scene", scene_dir, "COLMAP text directory")->required();
    train->add_option("--images", images_dir, "image directory (default: SCENE/images)");
    train->add_option("--order", order_file, "replay order, one image name per line");
    train->add_option("--config", config_file, "key=value configuration file");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_option("--ablate", ablate, "comma-separated ablations");
    auto* seed_opt = train->add_option("--seed", seed, "random seed");
    train->add_option("--holdout", holdout_file, "held-out image names");
    train->add_option("--refined", refined_file, "images.txt with refined poses for the final phase");
    train->add_option("--downscale", downscale, "integer image downscale")->check(CLI::PositiveNumber);
    train->add_flag("--quiet", quiet, "suppress per-event output");

    auto* render = app.add_subcommand("render", "render a trained field");
    render->add_option("--ply", ply_file, "field PLY")->required();
    render->add_option("--camera", camera_spec, "W,H,fx,fy,cx,cy,qw,qx,qy,qz,tx,ty,tz")->required();
    render->add_option("--out", out_file, "output PPM")->required();

    auto* metrics = app.add_subcommand("metrics", "held-out PSNR/SSIM of a trained field");
    metrics->add_option("--ply", ply_file, "field PLY")->required();
    metrics->add_option("--scene", scene_dir, "COLMAP text directory")->required();
    metrics->add_option("--holdout", holdout_file, "held-out image names")->required();
    metrics->add_option("--images", images_dir, "image directory (default: SCENE/images)");
    metrics->add_option("--downscale", downscale, "integer image downscale")->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "write a procedural test scene");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (images_dir.empty() && !scene_dir.empty()) images_dir = scene_dir + "/images";

        if (*train) {
            ps_config* raw = nullptr;
            check(ps_config_create(&raw), "creating config");
            std::unique_ptr<ps_config, ConfigDeleter> config(raw);
            if (!config_file.empty()) check(ps_config_load(config.get(), config_file.c_str()), "reading config");
            if (!ablate.empty()) check(ps_config_ablate(config.get(), ablate.c_str()), "parsing --ablate");
            if (*seed_opt) check(ps_config_set(config.get(), "seed", std::to_string(seed).c_str()), "setting seed");

            auto scene = load_scene(scene_dir, images_dir, downscale);
            if (!holdout_file.empty()) check(ps_scene_set_holdout(scene.get(), holdout_file.c_str()), "reading holdout");
            if (!order_file.empty()) check(ps_scene_set_order(scene.get(), order_file.c_str()), "reading order");
            if (!refined_file.empty()) {
                check(ps_scene_set_refined_poses(scene.get(), refined_file.c_str()), "reading refined poses");
            }
            ps_train_result result{};
            check(ps_train(config.get(), scene.get(), out_dir.c_str(), quiet ? nullptr : print_event, nullptr, &result),
                  "training");
            std::printf("gaussians=%zu events=%zu holdout_psnr=%.4f holdout_ssim=%.4f checksum=%016llx seconds=%.1f\n",
                        result.gaussians, result.events, result.holdout_psnr_final, result.holdout_ssim_final,
                        static_cast<unsigned long long>(result.checksum), result.seconds);
        } else if (*render) {
            const ps_camera camera = parse_camera(camera_spec);
            auto field = load_field(ply_file);
            check(ps_render_ppm(field.get(), &camera, out_file.c_str()), "rendering");
        } else if (*metrics) {
            auto field = load_field(ply_file);
            auto scene = load_scene(scene_dir, images_dir, downscale);
            check(ps_scene_set_holdout(scene.get(), holdout_file.c_str()), "reading holdout");
            double psnr = 0.0, ssim = 0.0;
            std::size_t views = 0;
            check(ps_evaluate_holdout(field.get(), scene.get(), &psnr, &ssim, &views), "evaluating");
            std::printf("views=%zu psnr=%.4f ssim=%.4f\n", views, psnr, ssim);
        } else if (*synth) {
            check(ps_synthesize_scene(out_dir.c_str(), *synth->get_option("--seed") ? seed : 7), "synthesizing");
        }
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "progsplat: %s\n", e.what());
        return kExitUsage;
    } catch (const Failure& f) {
        return f.exit_code;
    }
    return 0;
}
