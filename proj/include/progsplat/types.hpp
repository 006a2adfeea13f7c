// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <string>
#include <vector>

namespace progsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

using ImageId = int;

/// H x W x 3 image, row-major, channel-interleaved.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool empty() const { return data.empty(); }

    double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool same_shape(const Image& other) const { return width == other.width && height == other.height; }
};

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 camera_center() const { return -rotation.transpose() * translation; }

    static Pose from_quaternion(double qw, double qx, double qy, double qz, const Vec3& t) {
        Eigen::Quaterniond q(qw, qx, qy, qz);
        q.normalize();
        return Pose{q.toRotationMatrix(), t};
    }
};

struct CameraFrame {
    ImageId image_id = 0;
    std::string name;
    int width = 0;
    int height = 0;
    Intrinsics intrinsics;
    Pose pose;
    Image pixels;
    int feature_count = 0;
};

/// Throws InvalidParameter when the camera violates its invariants
/// (positive focal lengths, orthonormal rotation, finite pixels).
void validate_camera(const CameraFrame& camera);

} // namespace progsplat
