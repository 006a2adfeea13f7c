// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/pipeline.hpp"
#include "progsplat/scene.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace progsplat {

struct TrainSummary {
    std::vector<EventReport> events;
    FinalReport final_report;
    std::vector<ViewMetrics> holdout_after_phase2;
    std::vector<ViewMetrics> holdout_final;
    double mean_holdout_psnr_phase2 = 0.0;
    double mean_holdout_psnr_final = 0.0;
    double mean_holdout_ssim_final = 0.0;
    std::size_t gaussians = 0;
    double load_integer_std = 0.0; // mean over held-out views of std(G_p)
    std::uint64_t checksum = 0;
    double seconds = 0.0;
    GaussianField field;
};

struct TrainCallbacks {
    std::function<void(const EventReport&)> on_event;
};

/// Replays the bundle (pixels loaded) through all three phases. Frames named in
/// holdout are evaluated but never trained on.
TrainSummary train_scene(const SceneBundle& bundle, const PhaseConfig& config,
                         const std::vector<std::string>& holdout, const TrainCallbacks& callbacks = {});

std::vector<ViewMetrics> evaluate_views(const GaussianField& field, const SceneBundle& bundle,
                                        const std::vector<std::string>& names, const RenderOptions& options);

double mean_psnr(const std::vector<ViewMetrics>& views);

std::string event_json_line(const EventReport& report);

/// final.ply, events.jsonl, metrics.json, config.txt.
void write_train_outputs(const TrainSummary& summary, const PhaseConfig& config, const std::filesystem::path& out_dir);

} // namespace progsplat
