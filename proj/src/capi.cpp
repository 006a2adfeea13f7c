// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/progsplat.h"

#include "progsplat/config.hpp"
#include "progsplat/error.hpp"
#include "progsplat/ply.hpp"
#include "progsplat/ppm.hpp"
#include "progsplat/scene.hpp"
#include "progsplat/synthetic.hpp"
#include "progsplat/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <set>
#include <string>

struct ps_config {
    progsplat::PhaseConfig config;
};

struct ps_scene {
    progsplat::SceneBundle bundle;
    std::vector<std::string> holdout;
    bool explicit_holdout = false;
};

struct ps_field {
    progsplat::GaussianField field;
};

namespace {

thread_local std::string g_last_error;

ps_status to_status(progsplat::ErrorCode code) {
    using progsplat::ErrorCode;
    switch (code) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::DimensionMismatch:
        return PS_INVALID_ARGUMENT;
    case ErrorCode::NotFound:
        return PS_NOT_FOUND;
    case ErrorCode::ContractViolation:
        return PS_CONTRACT;
    case ErrorCode::Io:
        return PS_IO;
    case ErrorCode::Parse:
        return PS_PARSE;
    case ErrorCode::UnsupportedModel:
        return PS_UNSUPPORTED;
    case ErrorCode::Config:
        return PS_CONFIG;
    }
    return PS_INTERNAL;
}

template <class F>
ps_status guarded(F&& body) {
    try {
        g_last_error.clear();
        body();
        return PS_OK;
    } catch (const progsplat::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PS_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PS_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return PS_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) progsplat::fail(progsplat::ErrorCode::InvalidParameter, what);
}

progsplat::CameraFrame to_frame(const ps_camera& c) {
    progsplat::CameraFrame f;
    f.width = c.width;
    f.height = c.height;
    f.intrinsics = {c.fx, c.fy, c.cx, c.cy};
    require(c.qw * c.qw + c.qx * c.qx + c.qy * c.qy + c.qz * c.qz > 0.0, "camera quaternion is zero");
    f.pose = progsplat::Pose::from_quaternion(c.qw, c.qx, c.qy, c.qz, progsplat::Vec3(c.tx, c.ty, c.tz));
    f.pixels = progsplat::Image(c.width > 0 ? c.width : 0, c.height > 0 ? c.height : 0);
    progsplat::validate_camera(f);
    return f;
}

} // namespace

extern "C" {

const char* ps_last_error(void) { return g_last_error.c_str(); }

const char* ps_status_name(ps_status status) {
    switch (status) {
    case PS_OK: return "ok";
    case PS_INVALID_ARGUMENT: return "invalid argument";
    case PS_NOT_FOUND: return "not found";
    case PS_IO: return "i/o error";
    case PS_PARSE: return "parse error";
    case PS_UNSUPPORTED: return "unsupported";
    case PS_CONTRACT: return "contract violation";
    case PS_CONFIG: return "configuration error";
    case PS_INTERNAL: return "internal error";
    }
    return "unknown status";
}

ps_status ps_config_create(ps_config** out) {
    return guarded([&] {
        require(out, "out is null");
        *out = new ps_config;
    });
}

void ps_config_destroy(ps_config* config) { delete config; }

ps_status ps_config_set(ps_config* config, const char* key, const char* value) {
    return guarded([&] {
        require(config && key && value, "null argument");
        progsplat::set_config_value(config->config, key, value);
    });
}

ps_status ps_config_load(ps_config* config, const char* path) {
    return guarded([&] {
        require(config && path, "null argument");
        config->config = progsplat::read_config(path, config->config);
    });
}

ps_status ps_config_ablate(ps_config* config, const char* list) {
    return guarded([&] {
        require(config && list, "null argument");
        progsplat::apply_ablations(config->config, list);
    });
}

ps_status ps_config_format(const ps_config* config, char* buffer, size_t capacity, size_t* needed) {
    return guarded([&] {
        require(config, "config is null");
        const std::string text = progsplat::format_config(config->config);
        if (needed) *needed = text.size() + 1;
        if (buffer && capacity > 0) {
            const std::size_t n = std::min(capacity - 1, text.size());
            std::memcpy(buffer, text.data(), n);
            buffer[n] = '\0';
        }
    });
}

ps_status ps_scene_load(const char* scene_dir, const char* images_dir, int downscale, ps_scene** out) {
    return guarded([&] {
        require(scene_dir && out, "null argument");
        auto scene = std::make_unique<ps_scene>();
        scene->bundle = progsplat::read_colmap_text(scene_dir);
        const std::filesystem::path images = images_dir ? std::filesystem::path(images_dir)
                                                        : std::filesystem::path(scene_dir) / "images";
        progsplat::load_images(scene->bundle, images, downscale);
        *out = scene.release();
    });
}

void ps_scene_destroy(ps_scene* scene) { delete scene; }

size_t ps_scene_frame_count(const ps_scene* scene) { return scene ? scene->bundle.frames.size() : 0; }

ps_status ps_scene_set_order(ps_scene* scene, const char* path) {
    return guarded([&] {
        require(scene && path, "null argument");
        const auto names = progsplat::read_name_list(path);
        progsplat::apply_replay_order(scene->bundle, names);
        if (!scene->explicit_holdout) {
            const std::set<std::string> listed(names.begin(), names.end());
            scene->holdout.clear();
            for (const auto& f : scene->bundle.frames) {
                if (!listed.count(f.name)) scene->holdout.push_back(f.name);
            }
        }
    });
}

ps_status ps_scene_set_holdout(ps_scene* scene, const char* path) {
    return guarded([&] {
        require(scene && path, "null argument");
        auto names = progsplat::read_name_list(path);
        for (const auto& n : names) scene->bundle.id_by_name(n);
        scene->holdout = std::move(names);
        scene->explicit_holdout = true;
    });
}

ps_status ps_scene_set_refined_poses(ps_scene* scene, const char* images_txt) {
    return guarded([&] {
        require(scene && images_txt, "null argument");
        scene->bundle.refined_poses = progsplat::read_colmap_poses(images_txt);
    });
}

size_t ps_scene_holdout_count(const ps_scene* scene) { return scene ? scene->holdout.size() : 0; }

ps_status ps_train(const ps_config* config, const ps_scene* scene, const char* out_dir, ps_event_callback callback,
                   void* user, ps_train_result* result) {
    return guarded([&] {
        require(config && scene && out_dir, "null argument");
        progsplat::TrainCallbacks callbacks;
        if (callback) {
            callbacks.on_event = [&](const progsplat::EventReport& r) {
                callback(progsplat::event_json_line(r).c_str(), user);
            };
        }
        const auto summary = progsplat::train_scene(scene->bundle, config->config, scene->holdout, callbacks);
        progsplat::write_train_outputs(summary, config->config, out_dir);
        if (result) {
            result->gaussians = summary.gaussians;
            result->events = summary.events.size();
            result->holdout_psnr_phase2 = summary.mean_holdout_psnr_phase2;
            result->holdout_psnr_final = summary.mean_holdout_psnr_final;
            result->holdout_ssim_final = summary.mean_holdout_ssim_final;
            result->load_integer_std = summary.load_integer_std;
            result->checksum = summary.checksum;
            result->seconds = summary.seconds;
        }
    });
}

ps_status ps_field_load(const char* path, ps_field** out) {
    return guarded([&] {
        require(path && out, "null argument");
        auto field = std::make_unique<ps_field>();
        field->field = progsplat::read_ply(path);
        *out = field.release();
    });
}

void ps_field_destroy(ps_field* field) { delete field; }

ps_status ps_field_save(const ps_field* field, const char* path, int float32) {
    return guarded([&] {
        require(field && path, "null argument");
        progsplat::write_ply(field->field, path,
                             float32 ? progsplat::PlyPrecision::Float32 : progsplat::PlyPrecision::Float64);
    });
}

size_t ps_field_size(const ps_field* field) { return field ? field->field.size() : 0; }

int ps_field_sh_degree(const ps_field* field) { return field ? field->field.sh_degree : -1; }

uint64_t ps_field_checksum(const ps_field* field) { return field ? progsplat::field_checksum(field->field) : 0; }

ps_status ps_render(const ps_field* field, const ps_camera* camera, double* rgb) {
    return guarded([&] {
        require(field && camera && rgb, "null argument");
        const auto frame = to_frame(*camera);
        const auto out = progsplat::render(field->field, frame, progsplat::RenderOptions{});
        std::copy(out.color.data.begin(), out.color.data.end(), rgb);
    });
}

ps_status ps_render_ppm(const ps_field* field, const ps_camera* camera, const char* path) {
    return guarded([&] {
        require(field && camera && path, "null argument");
        const auto frame = to_frame(*camera);
        progsplat::write_ppm(progsplat::render(field->field, frame, progsplat::RenderOptions{}).color, path);
    });
}

ps_status ps_evaluate_holdout(const ps_field* field, const ps_scene* scene, double* mean_psnr, double* mean_ssim,
                              size_t* views) {
    return guarded([&] {
        require(field && scene, "null argument");
        const auto metrics =
            progsplat::evaluate_views(field->field, scene->bundle, scene->holdout, progsplat::RenderOptions{});
        double ssim = 0.0;
        for (const auto& m : metrics) ssim += m.ssim;
        if (mean_psnr) *mean_psnr = progsplat::mean_psnr(metrics);
        if (mean_ssim) *mean_ssim = metrics.empty() ? 0.0 : ssim / metrics.size();
        if (views) *views = metrics.size();
    });
}

ps_status ps_synthesize_scene(const char* out_dir, uint64_t seed) {
    return guarded([&] {
        require(out_dir, "null argument");
        progsplat::SyntheticOptions opts;
        opts.seed = seed;
        progsplat::write_synthetic_scene(progsplat::make_synthetic_scene(opts), out_dir);
    });
}

} // extern "C"
