// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"
#include "progsplat/losses.hpp"
#include "progsplat/optimizer.hpp"
#include "progsplat/overlap.hpp"
#include "progsplat/rasterizer.hpp"
#include "progsplat/scheduler.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace progsplat {

/// Component switches for ablation runs.
struct Ablations {
    bool no_field_update = false;
    bool no_image_weighting = false;
    bool no_semiglobal = false;
    bool no_load = false;
    bool no_splat_parallel = false;

    bool any() const {
        return no_field_update || no_image_weighting || no_semiglobal || no_load || no_splat_parallel;
    }
};

struct PhaseConfig {
    int initial_images = 30;
    int initial_iters = 2000;
    int iters_per_event = 200;
    int key_images = 10;
    double target_iters = 200.0;
    double lr_initial = 1.6e-4;
    double lr_final = 1.6e-6;
    int final_iters = 2000;
    LossWeights loss;

    ClassRates rates;
    /// Multiplier on the position rate; 0 selects the camera extent.
    double position_lr_scale = 0.0;

    int densify_interval = 100;
    double densify_grad_threshold = 0.0002;
    double percent_dense = 0.01;
    double prune_opacity = 0.005;
    /// Densification stops after this fraction of the final phase.
    double densify_final_fraction = 0.8;

    /// 0 selects the median nearest-neighbour spacing of the sparse cloud.
    double novelty_threshold = 0.0;
    int threshold_refresh_events = 25;
    double init_opacity = 0.1;
    int max_weight_layer = 4;
    bool interleave = true;

    int sh_degree = 3;
    /// Iterations between enabling successive SH bands.
    int sh_upgrade_interval = 1000;

    double near = 0.01;
    std::array<double, 3> background{0.0, 0.0, 0.0};
    int workers = 1;
    std::uint64_t seed = 0;
    Ablations ablations;

    /// Throws Config on out-of-range values.
    void validate() const;
    LrSchedule lr_schedule() const { return {lr_initial, lr_final, target_iters}; }
    LossWeights effective_loss() const;
};

enum class Phase { Initial = 1, Progressive = 2, Final = 3 };

struct MatchRecord {
    ImageId a = 0;
    ImageId b = 0;
    int count = 0;
};

struct MatchEntry {
    ImageId other = 0;
    int count = 0;
};

struct EventReport {
    std::size_t event = 0;
    ImageId image_id = 0;
    std::string name;
    std::size_t candidates = 0;
    std::size_t novel_points = 0;
    std::size_t inserted = 0;
    double novelty_threshold = 0.0;
    std::size_t gaussians_before = 0;
    std::size_t gaussians_after = 0;
    std::size_t densify_cloned = 0;
    std::size_t densify_split = 0;
    std::size_t densify_pruned = 0;
    std::size_t iterations = 0;
    std::vector<ImageId> keys;
    std::vector<int> key_allocation;
    double mean_l1 = 0.0;
    double mean_ssim_loss = 0.0;
    double mean_load = 0.0;
    double mean_total = 0.0;
    double new_view_psnr_before = 0.0;
    double new_view_psnr_after = 0.0;
    double lambda_load = 0.0;
    double ms_update = 0.0;
    double ms_weighting = 0.0;
    double ms_plan = 0.0;
    double ms_train = 0.0;
};

struct ViewMetrics {
    ImageId image_id = 0;
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct FinalReport {
    std::size_t gaussians = 0;
    std::size_t final_iterations = 0;
    double mean_train_psnr_before = 0.0;
    double mean_train_psnr_after = 0.0;
    std::vector<ViewMetrics> train_views;
    double ms_total = 0.0;
};

struct SessionState {
    GaussianField field;
    MatchMatrix matrix;
    TrainingState training;
    std::map<ImageId, CameraFrame> frames;
    std::vector<ImageId> registration_order;
    Phase phase = Phase::Initial;
    Optimizer optimizer;

    std::vector<Vec3> sparse_cloud;
    double novelty_threshold = 0.0;
    std::size_t events = 0;
    std::uint64_t iteration = 0;

    std::vector<double> grad_accum;
    std::vector<std::uint32_t> grad_denom;

    double scene_extent = 1.0;
    double position_lr_scale = 1.0;
    std::mt19937_64 rng;
    Diagnostics diagnostics;
    std::vector<EventReport> reports;
};

struct IterationResult {
    LossBreakdown loss;
    double position_rate = 0.0;
};

/// Seeds the field from the initial sparse cloud and trains on the first
/// frames with targets cycling uniformly over them.
SessionState phase1_initialize(std::span<const CameraFrame> frames, std::span<const SparsePoint> points,
                               std::span<const MatchRecord> matches, const PhaseConfig& config);

/// One fly-in event: match update, field expansion, weighting, planning and
/// iters_per_event training iterations.
EventReport phase2_step(SessionState& state, const CameraFrame& new_frame, std::span<const SparsePoint> new_points,
                        std::span<const MatchEntry> match_row, const PhaseConfig& config);

/// Applies refined poses (if any) and runs final_iters iterations on uniformly
/// random targets.
FinalReport phase3_finalize(SessionState& state, const std::map<ImageId, Pose>* refined_poses,
                            const PhaseConfig& config);

/// Forward, loss, backward, optimizer step and bookkeeping for one target.
IterationResult train_iteration(SessionState& state, ImageId target, const PhaseConfig& config);

RenderOptions render_options(const PhaseConfig& config);
ViewMetrics evaluate_view(const GaussianField& field, const CameraFrame& frame, const RenderOptions& options);

/// 64-bit FNV-1a over every parameter of the field (and its SH degree).
std::uint64_t field_checksum(const GaussianField& field);

} // namespace progsplat
