// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"
#include "progsplat/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace progsplat {

struct SyntheticOptions {
    int blobs = 48;
    int views = 24;
    int width = 64;
    int height = 64;
    int points_per_blob = 4;
    double scale_min = 0.08;
    double scale_max = 0.22;
    /// Blobs span x in [-half_length, half_length].
    double half_length = 3.2;
    /// Blob centers span y in [-half_height, half_height].
    double half_height = 0.8;
    std::uint64_t seed = 7;
};

struct SyntheticScene {
    GaussianField truth;
    SceneBundle bundle; // pixels rendered from truth
    std::vector<std::string> holdout;      // image names
    std::vector<std::string> replay_names; // every other view, sweep order
};

/// Coloured Gaussian blobs strewn along a strip, photographed by a camera
/// sweeping along it, so late views reveal regions unseen by early ones.
SyntheticScene make_synthetic_scene(const SyntheticOptions& options = {});

/// Writes cameras/images/points3D text files, images/*.ppm, order.txt and
/// holdout.txt under dir.
void write_synthetic_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

} // namespace progsplat
