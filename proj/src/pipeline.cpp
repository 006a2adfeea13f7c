// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/pipeline.hpp"

#include "progsplat/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace progsplat {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Vec3Hash {
    std::size_t operator()(const Vec3& v) const {
        std::size_t h = 0;
        for (int i = 0; i < 3; ++i) {
            std::uint64_t bits;
            const double d = v[i];
            std::memcpy(&bits, &d, sizeof bits);
            h ^= std::hash<std::uint64_t>{}(bits) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

void extend_cloud(SessionState& state, std::span<const SparsePoint> points) {
    std::unordered_set<Vec3, Vec3Hash> seen(state.sparse_cloud.begin(), state.sparse_cloud.end());
    for (const auto& p : points) {
        if (p.position.allFinite() && seen.insert(p.position).second) state.sparse_cloud.push_back(p.position);
    }
}

void refresh_threshold(SessionState& state, const PhaseConfig& config) {
    if (config.novelty_threshold > 0.0) {
        state.novelty_threshold = config.novelty_threshold;
        return;
    }
    state.novelty_threshold = median_nn_spacing(SpatialIndex(state.sparse_cloud));
}

void sync_buffers(SessionState& state) {
    state.optimizer.resize(state.field.size());
    state.grad_accum.resize(state.field.size(), 0.0);
    state.grad_denom.resize(state.field.size(), 0);
}

void maybe_densify(SessionState& state, const PhaseConfig& config, bool active) {
    if (!active || config.densify_interval <= 0 || state.iteration % config.densify_interval != 0) return;
    std::vector<double> stats(state.field.size(), 0.0);
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (state.grad_denom[i] > 0) stats[i] = state.grad_accum[i] / state.grad_denom[i];
    }
    DensifyOptions opts;
    opts.grad_threshold = config.densify_grad_threshold;
    opts.percent_dense = config.percent_dense;
    opts.scene_extent = state.scene_extent;
    opts.prune_opacity = config.prune_opacity;
    const DensifySummary summary = densify_and_prune(state.field, stats, opts, state.rng);
    state.optimizer.remap(summary.origin);
    state.grad_accum.assign(state.field.size(), 0.0);
    state.grad_denom.assign(state.field.size(), 0);
    if (!state.reports.empty() && state.phase == Phase::Progressive) {
        auto& r = state.reports.back();
        r.densify_cloned += summary.cloned;
        r.densify_split += summary.split;
        r.densify_pruned += summary.pruned;
    }
}

IterationResult run_iteration(SessionState& state, ImageId target, const PhaseConfig& config, bool densify) {
    IterationResult result = train_iteration(state, target, config);
    if (config.sh_upgrade_interval > 0 && state.iteration % config.sh_upgrade_interval == 0 &&
        state.field.sh_degree < config.sh_degree) {
        ++state.field.sh_degree;
    }
    maybe_densify(state, config, densify);
    return result;
}

double mean_train_psnr(const SessionState& state, const PhaseConfig& config, std::vector<ViewMetrics>* views) {
    const RenderOptions opts = render_options(config);
    double sum = 0.0;
    for (ImageId id : state.registration_order) {
        const ViewMetrics m = evaluate_view(state.field, state.frames.at(id), opts);
        sum += m.psnr;
        if (views) views->push_back(m);
    }
    return state.registration_order.empty() ? 0.0 : sum / state.registration_order.size();
}

} // namespace

void PhaseConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) fail(ErrorCode::Config, std::string("invalid configuration: ") + what);
    };
    require(initial_images >= 1, "initial_images must be >= 1");
    require(initial_iters >= 0, "initial_iters must be >= 0");
    require(iters_per_event > 0 && iters_per_event % 2 == 0, "iters_per_event must be positive and even");
    require(key_images >= 1, "key_images must be >= 1");
    require(target_iters > 0.0, "target_iters must be > 0");
    require(lr_final > 0.0 && lr_final <= lr_initial, "need 0 < lr_final <= lr_initial");
    require(final_iters >= 0, "final_iters must be >= 0");
    for (double w : {loss.l1, loss.ssim, loss.load}) require(std::isfinite(w) && w >= 0.0, "loss weights must be >= 0");
    require(densify_interval >= 0, "densify_interval must be >= 0");
    require(densify_final_fraction >= 0.0 && densify_final_fraction <= 1.0, "densify_final_fraction in [0,1]");
    require(novelty_threshold >= 0.0, "novelty_threshold must be >= 0");
    require(threshold_refresh_events >= 1, "threshold_refresh_events must be >= 1");
    require(init_opacity > 0.0 && init_opacity < 1.0, "init_opacity in (0,1)");
    require(max_weight_layer >= 2, "max_weight_layer must be >= 2");
    require(sh_degree >= 0 && sh_degree <= sh::kMaxDegree, "sh_degree in [0,3]");
    require(sh_upgrade_interval >= 0, "sh_upgrade_interval must be >= 0");
    require(near > 0.0, "near must be > 0");
    require(workers >= 1, "workers must be >= 1");
    require(position_lr_scale >= 0.0, "position_lr_scale must be >= 0");
}

LossWeights PhaseConfig::effective_loss() const {
    LossWeights w = loss;
    if (ablations.no_load) w.load = 0.0;
    return w;
}

RenderOptions render_options(const PhaseConfig& config) {
    RenderOptions opts;
    opts.near = config.near;
    opts.background = config.background;
    opts.workers = config.workers;
    return opts;
}

ViewMetrics evaluate_view(const GaussianField& field, const CameraFrame& frame, const RenderOptions& options) {
    ViewMetrics m;
    m.image_id = frame.image_id;
    m.name = frame.name;
    const RenderOutput out = render(field, frame, options);
    m.psnr = psnr(out.color, frame.pixels);
    m.ssim = (frame.width >= kSsimWindow && frame.height >= kSsimWindow) ? ssim(out.color, frame.pixels) : 0.0;
    return m;
}

std::uint64_t field_checksum(const GaussianField& field) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t degree = field.sh_degree;
    const std::uint64_t size = field.size();
    mix(&degree, sizeof degree);
    mix(&size, sizeof size);
    for (const auto& g : field.gaussians) {
        for (int k = 0; k < Gaussian::kParamCount; ++k) {
            const double v = g.param(k);
            mix(&v, sizeof v);
        }
    }
    return h;
}

IterationResult train_iteration(SessionState& state, ImageId target, const PhaseConfig& config) {
    const auto it = state.frames.find(target);
    if (it == state.frames.end()) fail(ErrorCode::NotFound, "render target " + std::to_string(target) + " unknown");
    const CameraFrame& frame = it->second;

    IterationResult result;
    result.position_rate =
        lr_blended(target, state.matrix, state.training, config.lr_schedule()) * state.position_lr_scale;
    const RenderOutput out = render(state.field, frame, render_options(config));
    result.loss = total_loss(out.color, frame.pixels, out, config.effective_loss());
    BackwardOptions bw;
    bw.mode = config.ablations.no_splat_parallel ? BackwardMode::PixelMajor : BackwardMode::SplatMajor;
    bw.workers = config.workers;
    const Gradients grads = render_backward(state.field, out, result.loss.dl_dcolor, result.loss.dl_dsoft, bw);
    state.optimizer.step(state.field, grads.params, grads.visible, result.position_rate, config.rates);
    for (std::size_t i = 0; i < state.field.size(); ++i) {
        if (!grads.visible[i]) continue;
        state.grad_accum[i] += grads.mean2d_norm[i];
        ++state.grad_denom[i];
    }
    state.training.record(target);
    ++state.iteration;
    return result;
}

SessionState phase1_initialize(std::span<const CameraFrame> frames, std::span<const SparsePoint> points,
                               std::span<const MatchRecord> matches, const PhaseConfig& config) {
    config.validate();
    if (frames.empty()) fail(ErrorCode::InvalidParameter, "initialization needs at least one frame");
    if (points.empty()) fail(ErrorCode::InvalidParameter, "initialization needs a non-empty sparse cloud");

    SessionState state;
    state.rng.seed(config.seed);
    for (const auto& f : frames) {
        validate_camera(f);
        if (f.pixels.width != f.width || f.pixels.height != f.height) {
            fail(ErrorCode::InvalidParameter, "frame '" + f.name + "' has no pixels of the declared size");
        }
        state.matrix.register_image(f.image_id, f.feature_count);
        state.frames.emplace(f.image_id, f);
        state.registration_order.push_back(f.image_id);
    }
    for (const auto& m : matches) state.matrix.set_matches(m.a, m.b, m.count);

    state.field.sh_degree = config.sh_upgrade_interval > 0 ? 0 : config.sh_degree;
    InsertOptions insert;
    insert.init_opacity = config.init_opacity;
    insert_points(state.field, points, insert, &state.diagnostics);
    if (state.field.size() == 0) fail(ErrorCode::InvalidParameter, "sparse cloud has no finite points");
    extend_cloud(state, points);
    refresh_threshold(state, config);

    Vec3 mean = Vec3::Zero();
    for (const auto& f : frames) mean += f.pose.camera_center();
    mean /= static_cast<double>(frames.size());
    double radius = 0.0;
    for (const auto& f : frames) radius = std::max(radius, (f.pose.camera_center() - mean).norm());
    state.scene_extent = radius > 0.0 ? 1.1 * radius : 1.0;
    state.position_lr_scale = config.position_lr_scale > 0.0 ? config.position_lr_scale : state.scene_extent;
    sync_buffers(state);

    state.phase = Phase::Initial;
    std::vector<ImageId> epoch;
    for (int i = 0; i < config.initial_iters; ++i) {
        if (epoch.empty()) {
            epoch = state.registration_order;
            std::shuffle(epoch.begin(), epoch.end(), state.rng);
        }
        const ImageId target = epoch.back();
        epoch.pop_back();
        run_iteration(state, target, config, true);
    }
    state.phase = Phase::Progressive;
    return state;
}

EventReport phase2_step(SessionState& state, const CameraFrame& new_frame, std::span<const SparsePoint> new_points,
                        std::span<const MatchEntry> match_row, const PhaseConfig& config) {
    if (state.phase == Phase::Final) fail(ErrorCode::ContractViolation, "session already finalized");
    state.phase = Phase::Progressive;
    if (state.frames.count(new_frame.image_id)) {
        fail(ErrorCode::InvalidParameter, "image " + std::to_string(new_frame.image_id) + " already registered");
    }
    validate_camera(new_frame);
    if (new_frame.pixels.width != new_frame.width || new_frame.pixels.height != new_frame.height) {
        fail(ErrorCode::InvalidParameter, "frame '" + new_frame.name + "' has no pixels of the declared size");
    }
    for (const auto& m : match_row) {
        if (!state.matrix.contains(m.other)) {
            fail(ErrorCode::NotFound, "match row references unregistered image " + std::to_string(m.other));
        }
    }

    const RenderOptions ropts = render_options(config);
    state.reports.emplace_back();
    EventReport& report = state.reports.back();
    report.event = state.events;
    report.image_id = new_frame.image_id;
    report.name = new_frame.name;
    report.candidates = new_points.size();
    report.gaussians_before = state.field.size();
    report.lambda_load = config.effective_loss().load;
    report.new_view_psnr_before = evaluate_view(state.field, new_frame, ropts).psnr;

    // (1) match matrix, (2) field expansion.
    auto t0 = Clock::now();
    state.matrix.register_image(new_frame.image_id, new_frame.feature_count);
    for (const auto& m : match_row) state.matrix.set_matches(new_frame.image_id, m.other, m.count);
    state.frames.emplace(new_frame.image_id, new_frame);
    state.registration_order.push_back(new_frame.image_id);

    if (state.events > 0 && state.events % config.threshold_refresh_events == 0) refresh_threshold(state, config);
    report.novelty_threshold = state.novelty_threshold;
    if (!config.ablations.no_field_update) {
        const SpatialIndex index(state.sparse_cloud);
        const double threshold = state.novelty_threshold > 0.0 ? state.novelty_threshold : 1e-12;
        const auto novel = filter_new_points(index, new_points, threshold);
        report.novel_points = novel.size();
        InsertOptions insert;
        insert.init_opacity = config.init_opacity;
        report.inserted = insert_points(state.field, novel, insert, &state.diagnostics);
        sync_buffers(state);
    }
    extend_cloud(state, new_points);
    report.ms_update = ms_since(t0);

    // (3) weighting, (4) plan.
    t0 = Clock::now();
    const LayerAssignment layers = assign_layers(state.matrix, new_frame.image_id);
    const ImageWeights weights = compute_weights(state.matrix, layers, WeightOptions{config.max_weight_layer});
    report.ms_weighting = ms_since(t0);

    t0 = Clock::now();
    PlanOptions popts;
    popts.iterations_per_event = config.iters_per_event;
    popts.key_images = config.key_images;
    popts.interleave = config.interleave;
    popts.semi_global = !config.ablations.no_semiglobal;
    popts.uniform_key_weights = config.ablations.no_image_weighting;
    const std::uint64_t plan_seed = config.seed * 0x9e3779b97f4a7c15ULL + state.events + 1;
    const IterationPlan plan = build_plan(weights, state.registration_order, popts, plan_seed);
    report.keys = plan.keys;
    report.key_allocation = plan.key_allocation;
    report.ms_plan = ms_since(t0);

    // (5) training, (6) densification on cadence.
    t0 = Clock::now();
    for (ImageId target : plan.entries) {
        const IterationResult r = run_iteration(state, target, config, true);
        report.mean_l1 += r.loss.l1;
        report.mean_ssim_loss += r.loss.ssim_loss;
        report.mean_load += r.loss.load;
        report.mean_total += r.loss.total;
        ++report.iterations;
    }
    if (report.iterations > 0) {
        const double n = static_cast<double>(report.iterations);
        report.mean_l1 /= n;
        report.mean_ssim_loss /= n;
        report.mean_load /= n;
        report.mean_total /= n;
    }
    report.ms_train = ms_since(t0);
    report.gaussians_after = state.field.size();
    report.new_view_psnr_after = evaluate_view(state.field, new_frame, ropts).psnr;
    ++state.events;
    return report;
}

FinalReport phase3_finalize(SessionState& state, const std::map<ImageId, Pose>* refined_poses,
                            const PhaseConfig& config) {
    const auto t0 = Clock::now();
    if (refined_poses) {
        for (const auto& [id, pose] : *refined_poses) {
            const auto it = state.frames.find(id);
            if (it != state.frames.end()) it->second.pose = pose;
        }
    }
    FinalReport report;
    report.mean_train_psnr_before = mean_train_psnr(state, config, nullptr);
    state.phase = Phase::Final;

    std::uniform_int_distribution<std::size_t> pick(0, state.registration_order.size() - 1);
    const auto densify_until = static_cast<int>(std::floor(config.densify_final_fraction * config.final_iters));
    for (int i = 0; i < config.final_iters; ++i) {
        const ImageId target = state.registration_order[pick(state.rng)];
        run_iteration(state, target, config, i < densify_until);
        ++report.final_iterations;
    }
    report.mean_train_psnr_after = mean_train_psnr(state, config, &report.train_views);
    report.gaussians = state.field.size();
    report.ms_total = ms_since(t0);
    return report;
}

} // namespace progsplat
