// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/progsplat.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
    const fs::path p = fs::temp_directory_path() / (std::string("progsplat_capi_") + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ps_config* small_config() {
    ps_config* c = nullptr;
    EXPECT_EQ(ps_config_create(&c), PS_OK);
    const char* kv[][2] = {{"initial_images", "4"}, {"initial_iters", "30"}, {"iters_per_event", "10"},
                           {"key_images", "3"},     {"final_iters", "20"},   {"densify_grad_threshold", "0.004"}};
    for (const auto& p : kv) EXPECT_EQ(ps_config_set(c, p[0], p[1]), PS_OK);
    return c;
}

} // namespace

TEST(CApi, StatusNames) {
    EXPECT_STREQ(ps_status_name(PS_OK), "ok");
    EXPECT_STRNE(ps_status_name(PS_CONFIG), ps_status_name(PS_IO));
}

TEST(CApi, ConfigErrors) {
    ps_config* c = nullptr;
    ASSERT_EQ(ps_config_create(&c), PS_OK);
    EXPECT_EQ(ps_config_set(c, "not_a_key", "1"), PS_CONFIG);
    EXPECT_NE(std::string(ps_last_error()).find("not_a_key"), std::string::npos);
    EXPECT_EQ(ps_config_set(c, "seed", "3"), PS_OK);
    EXPECT_STREQ(ps_last_error(), "");
    EXPECT_EQ(ps_config_set(nullptr, "seed", "3"), PS_INVALID_ARGUMENT);
    EXPECT_EQ(ps_config_ablate(c, "no_load,bogus"), PS_CONFIG);
    EXPECT_EQ(ps_config_load(c, "/nonexistent/progsplat.cfg"), PS_IO);
    ps_config_destroy(c);
    ps_config_destroy(nullptr);
}

TEST(CApi, ConfigFormatSizing) {
    ps_config* c = nullptr;
    ASSERT_EQ(ps_config_create(&c), PS_OK);
    ASSERT_EQ(ps_config_set(c, "initial_images", "12"), PS_OK);
    size_t needed = 0;
    EXPECT_EQ(ps_config_format(c, nullptr, 0, &needed), PS_OK);
    ASSERT_GT(needed, 1u);
    std::vector<char> buf(needed);
    EXPECT_EQ(ps_config_format(c, buf.data(), buf.size(), &needed), PS_OK);
    EXPECT_NE(std::string(buf.data()).find("initial_images=12"), std::string::npos);
    ps_config_destroy(c);
}

TEST(CApi, SceneErrors) {
    ps_scene* s = nullptr;
    EXPECT_EQ(ps_scene_load("/nonexistent/scene", nullptr, 1, &s), PS_IO);
    EXPECT_EQ(s, nullptr);
    EXPECT_EQ(ps_scene_load(nullptr, nullptr, 1, &s), PS_INVALID_ARGUMENT);
}

TEST(CApi, SynthTrainRenderRoundTrip) {
    const auto dir = scratch("flow");
    ASSERT_EQ(ps_synthesize_scene((dir / "scene").c_str(), 3), PS_OK) << ps_last_error();

    ps_scene* scene = nullptr;
    ASSERT_EQ(ps_scene_load((dir / "scene").c_str(), nullptr, 2, &scene), PS_OK) << ps_last_error();
    EXPECT_EQ(ps_scene_frame_count(scene), 24u);
    ASSERT_EQ(ps_scene_set_order(scene, (dir / "scene" / "order.txt").c_str()), PS_OK) << ps_last_error();
    EXPECT_EQ(ps_scene_holdout_count(scene), 4u);

    ps_config* cfg = small_config();
    int events = 0;
    auto on_event = [](const char* line, void* user) {
        ++*static_cast<int*>(user);
        EXPECT_EQ(line[0], '{');
    };
    ps_train_result result{};
    ASSERT_EQ(ps_train(cfg, scene, (dir / "out").c_str(), on_event, &events, &result), PS_OK) << ps_last_error();
    EXPECT_EQ(events, 16);
    EXPECT_EQ(result.events, 16u);
    for (const char* f : {"final.ply", "events.jsonl", "metrics.json", "config.txt"}) {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }

    ps_field* field = nullptr;
    ASSERT_EQ(ps_field_load((dir / "out" / "final.ply").c_str(), &field), PS_OK) << ps_last_error();
    EXPECT_EQ(ps_field_size(field), result.gaussians);
    EXPECT_EQ(ps_field_checksum(field), result.checksum);

    double psnr = 0, ssim = 0;
    size_t views = 0;
    ASSERT_EQ(ps_evaluate_holdout(field, scene, &psnr, &ssim, &views), PS_OK) << ps_last_error();
    EXPECT_EQ(views, 4u);
    if (result.gaussians > 0) EXPECT_NEAR(psnr, result.holdout_psnr_final, 1e-9);

    ASSERT_EQ(ps_field_save(field, (dir / "copy.ply").c_str(), 0), PS_OK);
    ps_field* copy = nullptr;
    ASSERT_EQ(ps_field_load((dir / "copy.ply").c_str(), &copy), PS_OK);
    EXPECT_EQ(ps_field_checksum(copy), ps_field_checksum(field));

    ps_camera cam{16, 12, 20, 20, 8, 6, 1, 0, 0, 0, 0, 0, 4};
    std::vector<double> rgb(16 * 12 * 3, -1.0);
    EXPECT_EQ(ps_render(field, &cam, rgb.data()), PS_OK);
    for (double v : rgb) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(ps_render_ppm(field, &cam, (dir / "view.ppm").c_str()), PS_OK);
    EXPECT_TRUE(fs::exists(dir / "view.ppm"));
    cam.fx = -1;
    EXPECT_EQ(ps_render(field, &cam, rgb.data()), PS_INVALID_ARGUMENT);

    ps_field_destroy(copy);
    ps_field_destroy(field);
    ps_config_destroy(cfg);
    ps_scene_destroy(scene);
    fs::remove_all(dir);
}

TEST(CApi, FieldLoadErrors) {
    ps_field* f = nullptr;
    EXPECT_EQ(ps_field_load("/nonexistent/x.ply", &f), PS_IO);
    const auto dir = scratch("badply");
    std::ofstream(dir / "bad.ply") << "not a ply\n";
    EXPECT_EQ(ps_field_load((dir / "bad.ply").c_str(), &f), PS_PARSE);
    fs::remove_all(dir);
}
