// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace progsplat {

struct ScenePoint {
    std::int64_t id = 0;
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero(); // [0, 1]
    std::vector<ImageId> track; // distinct image ids, ascending
};

/// A pre-solved reconstruction replayed as a fly-in stream.
struct SceneBundle {
    std::vector<CameraFrame> frames; // images.txt order
    std::vector<ScenePoint> points;
    std::map<ImageId, std::vector<std::size_t>> image_points; // indices into points
    std::map<std::pair<ImageId, ImageId>, int> matches;        // key ordered (lo, hi)
    std::vector<ImageId> replay_order;
    std::map<ImageId, Pose> refined_poses;

    const CameraFrame& frame(ImageId id) const;
    CameraFrame& frame(ImageId id);
    ImageId id_by_name(const std::string& name) const;
    int match_count(ImageId a, ImageId b) const;
};

/// Parses cameras.txt, images.txt and points3D.txt (COLMAP text layout).
/// Supported camera models: PINHOLE, SIMPLE_PINHOLE.
SceneBundle read_colmap_text(const std::filesystem::path& dir);

/// Poses from an images.txt-layout file, keyed by image id.
std::map<ImageId, Pose> read_colmap_poses(const std::filesystem::path& images_txt);

/// Writes the bundle in COLMAP text layout (PINHOLE cameras, one per frame).
void write_colmap_text(const SceneBundle& bundle, const std::filesystem::path& dir);

/// Image names, one per line; blank lines and '#' comments ignored.
std::vector<std::string> read_name_list(const std::filesystem::path& path);

/// Sets replay_order from a list of image names. Names must be unique and
/// registered; frames not listed are left out of the replay.
void apply_replay_order(SceneBundle& bundle, const std::vector<std::string>& names);

/// Decodes one raster per frame (binary PPM) from dir, divides by 255, and
/// applies an integer box downscale to pixels and intrinsics alike.
void load_images(SceneBundle& bundle, const std::filesystem::path& dir, int downscale = 1);

} // namespace progsplat
