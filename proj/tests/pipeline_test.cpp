// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/error.hpp"
#include "progsplat/optimizer.hpp"
#include "progsplat/pipeline.hpp"
#include "progsplat/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace progsplat;

TEST(OptimizerTest, ZeroGradientsLeaveParameters) {
    GaussianField field;
    field.sh_degree = 3;
    field.gaussians.resize(3);
    for (auto& g : field.gaussians) {
        for (int k = 0; k < Gaussian::kParamCount; ++k) g.param(k) = 0.1 * k;
    }
    const auto before = field.gaussians;
    Optimizer opt(3);
    const std::vector<Gaussian> grads(3);
    const std::vector<std::uint8_t> visible(3, 1);
    for (int i = 0; i < 5; ++i) opt.step(field, grads, visible, 0.01, {});
    for (std::size_t i = 0; i < 3; ++i) {
        for (int k = 0; k < Gaussian::kParamCount; ++k) EXPECT_EQ(field.gaussians[i].param(k), before[i].param(k));
    }
}

TEST(OptimizerTest, QuadraticConverges) {
    GaussianField field;
    field.gaussians.resize(1);
    Optimizer opt(1);
    const std::vector<std::uint8_t> visible{1};
    for (int step = 0; step < 500; ++step) {
        std::vector<Gaussian> grads(1);
        grads[0].position[0] = 2.0 * (field.gaussians[0].position[0] - 3.0);
        opt.step(field, grads, visible, 0.05, {});
    }
    EXPECT_NEAR(field.gaussians[0].position[0], 3.0, 0.05);
}

TEST(OptimizerTest, InvisibleUntouched) {
    GaussianField field;
    field.gaussians.resize(2);
    Optimizer opt(2);
    std::vector<Gaussian> grads(2);
    grads[0].position[0] = grads[1].position[0] = 1.0;
    const std::vector<std::uint8_t> visible{1, 0};
    opt.step(field, grads, visible, 0.1, {});
    EXPECT_NE(field.gaussians[0].position[0], 0.0);
    EXPECT_EQ(field.gaussians[1].position[0], 0.0);
    EXPECT_EQ(opt.steps(0), 1u);
    EXPECT_EQ(opt.steps(1), 0u);
}

TEST(OptimizerTest, NewEntriesStartAtZero) {
    GaussianField field;
    field.gaussians.resize(2);
    Optimizer opt(2);
    std::vector<Gaussian> grads(2);
    grads[0].opacity_logit = grads[1].opacity_logit = 0.5;
    opt.step(field, grads, std::vector<std::uint8_t>{1, 1}, 0.1, {});
    const std::vector<std::ptrdiff_t> origin{1, -1};
    opt.remap(origin);
    EXPECT_EQ(opt.steps(0), 1u);
    EXPECT_NE(opt.first_moment(0).opacity_logit, 0.0);
    EXPECT_EQ(opt.steps(1), 0u);
    EXPECT_EQ(opt.first_moment(1).opacity_logit, 0.0);
    EXPECT_EQ(opt.second_moment(1).opacity_logit, 0.0);
    opt.resize(4);
    EXPECT_EQ(opt.first_moment(3).opacity_logit, 0.0);
}

TEST(OptimizerTest, SizeMismatchRejected) {
    GaussianField field;
    field.gaussians.resize(2);
    Optimizer opt(1);
    const std::vector<Gaussian> grads(2);
    EXPECT_THROW(opt.step(field, grads, std::vector<std::uint8_t>(2, 1), 0.1, {}), Error);
}

namespace {

SyntheticScene small_scene(int views, int size = 24) {
    SyntheticOptions o;
    o.blobs = 14;
    o.views = views;
    o.width = size;
    o.height = size;
    o.points_per_blob = 3;
    o.seed = 3;
    return make_synthetic_scene(o);
}

std::vector<SparsePoint> points_of(const SceneBundle& b) {
    std::vector<SparsePoint> pts;
    for (const auto& p : b.points) pts.push_back({p.position, p.color});
    return pts;
}

std::vector<MatchRecord> matches_within(const SceneBundle& b, std::span<const CameraFrame> frames) {
    std::vector<MatchRecord> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t j = i + 1; j < frames.size(); ++j) {
            const int c = b.match_count(frames[i].image_id, frames[j].image_id);
            if (c > 0) out.push_back({frames[i].image_id, frames[j].image_id, c});
        }
    }
    return out;
}

PhaseConfig small_config() {
    PhaseConfig c;
    c.initial_images = 4;
    c.initial_iters = 40;
    c.iters_per_event = 20;
    c.key_images = 3;
    c.final_iters = 40;
    c.densify_grad_threshold = 0.004;
    c.seed = 5;
    return c;
}

struct Event {
    std::vector<SparsePoint> candidates;
    std::vector<MatchEntry> row;
};

Event event_for(const SceneBundle& b, const SessionState& s, ImageId id) {
    Event e;
    for (std::size_t k : b.image_points.at(id)) e.candidates.push_back({b.points[k].position, b.points[k].color});
    for (ImageId other : s.registration_order) {
        const int c = b.match_count(id, other);
        if (c > 0) e.row.push_back({other, c});
    }
    return e;
}

} // namespace

TEST(Phase1, TargetsCycleUniformly) {
    const auto scene = small_scene(30, 16);
    PhaseConfig cfg = small_config();
    cfg.initial_images = 30;
    cfg.initial_iters = 2000;
    cfg.densify_interval = 1000000;
    const std::span<const CameraFrame> frames(scene.bundle.frames);
    const auto pts = points_of(scene.bundle);
    const auto state = phase1_initialize(frames, pts, {}, cfg);
    std::uint64_t sum = 0;
    for (const auto& f : frames) {
        const auto t = state.training.iterations(f.image_id);
        EXPECT_TRUE(t == 66 || t == 67) << t;
        sum += t;
    }
    EXPECT_EQ(sum, 2000u);
    EXPECT_EQ(state.training.global_iterations(), 2000u);
    EXPECT_EQ(state.phase, Phase::Progressive);
}

TEST(Phase1, ZeroIterationsIsRawSeeding) {
    const auto scene = small_scene(6);
    PhaseConfig cfg = small_config();
    cfg.initial_iters = 0;
    const std::span<const CameraFrame> frames(scene.bundle.frames.data(), 4);
    const auto pts = points_of(scene.bundle);
    const auto state = phase1_initialize(frames, pts, {}, cfg);
    GaussianField seeded;
    insert_points(seeded, pts, {cfg.init_opacity});
    EXPECT_EQ(field_checksum(state.field), field_checksum(seeded));
}

TEST(Phase1, EmptyCloudRejected) {
    const auto scene = small_scene(6);
    const std::span<const CameraFrame> frames(scene.bundle.frames.data(), 4);
    EXPECT_THROW(phase1_initialize(frames, {}, {}, small_config()), Error);
}

TEST(Phase1, DeterministicChecksum) {
    const auto scene = small_scene(6);
    const std::span<const CameraFrame> frames(scene.bundle.frames.data(), 4);
    const auto pts = points_of(scene.bundle);
    const auto a = phase1_initialize(frames, pts, {}, small_config());
    const auto b = phase1_initialize(frames, pts, {}, small_config());
    EXPECT_EQ(field_checksum(a.field), field_checksum(b.field));
    auto other = small_config();
    other.seed = 6;
    EXPECT_NE(field_checksum(phase1_initialize(frames, pts, {}, other).field), field_checksum(a.field));
}

TEST(Phase2, EventBudgetAndBookkeeping) {
    const auto scene = small_scene(8);
    const auto& b = scene.bundle;
    const std::span<const CameraFrame> first(b.frames.data(), 4);
    const auto pts = points_of(b);
    auto cfg = small_config();
    auto state = phase1_initialize(first, pts, matches_within(b, first), cfg);
    for (std::size_t i = 4; i < 8; ++i) {
        const ImageId id = b.frames[i].image_id;
        const auto ev = event_for(b, state, id);
        const auto before = state.training.global_iterations();
        const auto report = phase2_step(state, b.frames[i], ev.candidates, ev.row, cfg);
        EXPECT_EQ(state.training.global_iterations() - before, static_cast<std::uint64_t>(cfg.iters_per_event));
        EXPECT_EQ(report.iterations, static_cast<std::size_t>(cfg.iters_per_event));
        EXPECT_EQ(report.image_id, id);
        EXPECT_TRUE(state.matrix.contains(id));
        EXPECT_TRUE(state.field.all_finite());
        EXPECT_EQ(state.optimizer.size(), state.field.size());
    }
    EXPECT_EQ(state.events, 4u);
}

TEST(Phase2, DuplicateFrameRejected) {
    const auto scene = small_scene(6);
    const auto& b = scene.bundle;
    const std::span<const CameraFrame> first(b.frames.data(), 4);
    auto state = phase1_initialize(first, points_of(b), {}, small_config());
    EXPECT_THROW(phase2_step(state, b.frames[1], {}, {}, small_config()), Error);
}

TEST(Phase2, NoNovelPointsKeepsSize) {
    const auto scene = small_scene(6);
    const auto& b = scene.bundle;
    const std::span<const CameraFrame> first(b.frames.data(), 4);
    const auto pts = points_of(b);
    auto cfg = small_config();
    cfg.densify_interval = 1000000;
    auto state = phase1_initialize(first, pts, {}, cfg);
    const auto size = state.field.size();
    // Every candidate is already in the cloud.
    const auto report = phase2_step(state, b.frames[4], pts, {}, cfg);
    EXPECT_EQ(report.novel_points, 0u);
    EXPECT_EQ(state.field.size(), size);
}

TEST(Phase2, NewImageIsTopKey) {
    const auto scene = small_scene(8);
    const auto& b = scene.bundle;
    const std::span<const CameraFrame> first(b.frames.data(), 4);
    auto cfg = small_config();
    auto state = phase1_initialize(first, points_of(b), matches_within(b, first), cfg);
    const auto ev = event_for(b, state, b.frames[4].image_id);
    const auto report = phase2_step(state, b.frames[4], ev.candidates, ev.row, cfg);
    ASSERT_FALSE(report.keys.empty());
    EXPECT_EQ(report.keys.front(), b.frames[4].image_id);
}

TEST(Phase3, ZeroIterationsKeepsMetrics) {
    const auto scene = small_scene(6);
    const std::span<const CameraFrame> first(scene.bundle.frames.data(), 4);
    auto cfg = small_config();
    cfg.final_iters = 0;
    auto state = phase1_initialize(first, points_of(scene.bundle), {}, cfg);
    const auto sum = field_checksum(state.field);
    const auto report = phase3_finalize(state, nullptr, cfg);
    EXPECT_EQ(report.mean_train_psnr_before, report.mean_train_psnr_after);
    EXPECT_EQ(field_checksum(state.field), sum);
    EXPECT_EQ(report.final_iterations, 0u);
}

TEST(Phase3, IdentityRefinementChangesNothing) {
    const auto scene = small_scene(6);
    const std::span<const CameraFrame> first(scene.bundle.frames.data(), 4);
    const auto pts = points_of(scene.bundle);
    auto cfg = small_config();
    auto a = phase1_initialize(first, pts, {}, cfg);
    auto b = phase1_initialize(first, pts, {}, cfg);
    std::map<ImageId, Pose> same;
    for (const auto& f : first) same[f.image_id] = f.pose;
    phase3_finalize(a, nullptr, cfg);
    phase3_finalize(b, &same, cfg);
    EXPECT_EQ(field_checksum(a.field), field_checksum(b.field));
}

TEST(Phase3, TrainPsnrDoesNotDrop) {
    const auto scene = small_scene(6);
    const std::span<const CameraFrame> first(scene.bundle.frames.data(), 4);
    auto cfg = small_config();
    cfg.ablations.no_load = true;
    cfg.final_iters = 300;
    auto state = phase1_initialize(first, points_of(scene.bundle), {}, cfg);
    const auto report = phase3_finalize(state, nullptr, cfg);
    EXPECT_GE(report.mean_train_psnr_after, report.mean_train_psnr_before);
    EXPECT_EQ(report.final_iterations, 300u);
    EXPECT_EQ(state.phase, Phase::Final);
}

TEST(Config, ValidationAndLoadSwitch) {
    PhaseConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_DOUBLE_EQ(c.effective_loss().load, 0.41);
    c.ablations.no_load = true;
    EXPECT_EQ(c.effective_loss().load, 0.0);
    c.iters_per_event = 201;
    EXPECT_THROW(c.validate(), Error);
}
