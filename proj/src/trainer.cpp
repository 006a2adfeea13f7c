// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/trainer.hpp"

#include "progsplat/config.hpp"
#include "progsplat/error.hpp"
#include "progsplat/ply.hpp"
#include "progsplat/replay.hpp"

#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>

namespace progsplat {

namespace {

using nlohmann::json;

json views_json(const std::vector<ViewMetrics>& views) {
    json out = json::array();
    for (const auto& v : views) out.push_back({{"image_id", v.image_id}, {"name", v.name}, {"psnr", v.psnr}, {"ssim", v.ssim}});
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::vector<ViewMetrics> evaluate_views(const GaussianField& field, const SceneBundle& bundle,
                                        const std::vector<std::string>& names, const RenderOptions& options) {
    std::vector<ViewMetrics> out;
    for (const auto& name : names) out.push_back(evaluate_view(field, bundle.frame(bundle.id_by_name(name)), options));
    return out;
}

double mean_psnr(const std::vector<ViewMetrics>& views) {
    if (views.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& v : views) sum += v.psnr;
    return sum / views.size();
}

TrainSummary train_scene(const SceneBundle& bundle, const PhaseConfig& config, const std::vector<std::string>& holdout,
                         const TrainCallbacks& callbacks) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    std::set<ImageId> held;
    for (const auto& name : holdout) held.insert(bundle.id_by_name(name));
    for (const auto& f : bundle.frames) {
        if (f.pixels.width != f.width || f.pixels.height != f.height) {
            fail(ErrorCode::InvalidParameter, "frame '" + f.name + "' has no pixels loaded");
        }
    }

    ReplayStream stream(bundle);
    std::vector<FlyInEvent> pending;
    std::vector<CameraFrame> initial;
    std::set<ImageId> initial_ids;
    while (!stream.done() && initial.size() < static_cast<std::size_t>(config.initial_images)) {
        FlyInEvent e = stream.next();
        if (held.count(e.frame->image_id)) continue;
        initial.push_back(*e.frame);
        initial_ids.insert(e.frame->image_id);
    }
    if (initial.empty()) fail(ErrorCode::InvalidParameter, "replay order has no trainable frames");

    std::vector<SparsePoint> seed_points;
    for (const auto& p : bundle.points) {
        for (ImageId id : p.track) {
            if (initial_ids.count(id)) {
                seed_points.push_back({p.position, p.color});
                break;
            }
        }
    }
    std::vector<MatchRecord> seed_matches;
    for (const auto& [key, count] : bundle.matches) {
        if (initial_ids.count(key.first) && initial_ids.count(key.second)) {
            seed_matches.push_back({key.first, key.second, count});
        }
    }

    SessionState state = phase1_initialize(initial, seed_points, seed_matches, config);
    TrainSummary summary;
    while (!stream.done()) {
        FlyInEvent e = stream.next();
        if (held.count(e.frame->image_id)) continue;
        std::vector<MatchEntry> row;
        for (const auto& m : e.match_row) {
            if (state.matrix.contains(m.other)) row.push_back(m);
        }
        EventReport report = phase2_step(state, *e.frame, e.candidates, row, config);
        if (callbacks.on_event) callbacks.on_event(report);
        summary.events.push_back(std::move(report));
    }

    const RenderOptions ropts = render_options(config);
    summary.holdout_after_phase2 = evaluate_views(state.field, bundle, holdout, ropts);
    summary.mean_holdout_psnr_phase2 = mean_psnr(summary.holdout_after_phase2);
    summary.final_report =
        phase3_finalize(state, bundle.refined_poses.empty() ? nullptr : &bundle.refined_poses, config);
    summary.holdout_final = evaluate_views(state.field, bundle, holdout, ropts);
    summary.mean_holdout_psnr_final = mean_psnr(summary.holdout_final);
    for (const auto& v : summary.holdout_final) summary.mean_holdout_ssim_final += v.ssim;
    if (!summary.holdout_final.empty()) summary.mean_holdout_ssim_final /= summary.holdout_final.size();

    // Per-pixel count spread on held-out views, or on training views without a holdout.
    std::vector<ImageId> probe;
    for (const auto& name : holdout) probe.push_back(bundle.id_by_name(name));
    if (probe.empty()) probe = state.registration_order;
    for (ImageId id : probe) {
        const RenderOutput out = render(state.field, bundle.frame(id), ropts);
        summary.load_integer_std += load_balancing_loss(out).integer_std;
    }
    if (!probe.empty()) summary.load_integer_std /= probe.size();

    summary.gaussians = state.field.size();
    summary.checksum = field_checksum(state.field);
    summary.field = std::move(state.field);
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

std::string event_json_line(const EventReport& r) {
    const json j = {
        {"event", r.event},
        {"image_id", r.image_id},
        {"name", r.name},
        {"candidates", r.candidates},
        {"novel_points", r.novel_points},
        {"inserted", r.inserted},
        {"novelty_threshold", r.novelty_threshold},
        {"gaussians_before", r.gaussians_before},
        {"gaussians_after", r.gaussians_after},
        {"densify_cloned", r.densify_cloned},
        {"densify_split", r.densify_split},
        {"densify_pruned", r.densify_pruned},
        {"iterations", r.iterations},
        {"keys", r.keys},
        {"key_allocation", r.key_allocation},
        {"mean_l1", r.mean_l1},
        {"mean_ssim_loss", r.mean_ssim_loss},
        {"mean_load", r.mean_load},
        {"mean_total", r.mean_total},
        {"lambda_load", r.lambda_load},
        {"new_view_psnr_before", r.new_view_psnr_before},
        {"new_view_psnr_after", r.new_view_psnr_after},
        {"ms_update", r.ms_update},
        {"ms_weighting", r.ms_weighting},
        {"ms_plan", r.ms_plan},
        {"ms_train", r.ms_train},
    };
    return j.dump();
}

void write_train_outputs(const TrainSummary& summary, const PhaseConfig& config, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());
    write_ply(summary.field, out_dir / "final.ply");

    auto open = [&](const char* name) {
        std::ofstream out(out_dir / name);
        if (!out) fail(ErrorCode::Io, "cannot write " + (out_dir / name).string());
        return out;
    };
    {
        std::ofstream events = open("events.jsonl");
        for (const auto& r : summary.events) events << event_json_line(r) << '\n';
    }
    {
        const auto& f = summary.final_report;
        const json metrics = {
            {"gaussians", summary.gaussians},
            {"events", summary.events.size()},
            {"checksum", hex64(summary.checksum)},
            {"seconds", summary.seconds},
            {"lambda_load", config.effective_loss().load},
            {"load_integer_std", summary.load_integer_std},
            {"holdout_psnr_phase2", summary.mean_holdout_psnr_phase2},
            {"holdout_psnr_final", summary.mean_holdout_psnr_final},
            {"holdout_ssim_final", summary.mean_holdout_ssim_final},
            {"holdout_views", views_json(summary.holdout_final)},
            {"train_psnr_before_final", f.mean_train_psnr_before},
            {"train_psnr_final", f.mean_train_psnr_after},
            {"final_iterations", f.final_iterations},
        };
        open("metrics.json") << metrics.dump(2) << '\n';
    }
    open("config.txt") << format_config(config);
}

} // namespace progsplat
