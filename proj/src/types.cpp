// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/types.hpp"

#include "progsplat/error.hpp"

#include <cmath>

namespace progsplat {

void validate_camera(const CameraFrame& camera) {
    const auto& k = camera.intrinsics;
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
        fail(ErrorCode::InvalidParameter, "camera '" + camera.name + "': focal lengths must be positive");
    }
    if (camera.width <= 0 || camera.height <= 0) {
        fail(ErrorCode::InvalidParameter, "camera '" + camera.name + "': image size must be positive");
    }
    const Mat3& r = camera.pose.rotation;
    if (!r.allFinite() || !camera.pose.translation.allFinite() ||
        (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
        fail(ErrorCode::InvalidParameter, "camera '" + camera.name + "': pose rotation is not orthonormal");
    }
    for (double v : camera.pixels.data) {
        if (!std::isfinite(v)) fail(ErrorCode::InvalidParameter, "camera '" + camera.name + "': non-finite pixel");
    }
}

} // namespace progsplat
