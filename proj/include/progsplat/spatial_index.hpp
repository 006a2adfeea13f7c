// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/types.hpp"

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace progsplat {

/// Exact nearest-neighbour index over a static point set (k-d tree).
/// Immutable once built; rebuild to add points.
class SpatialIndex {
  public:
    struct Neighbor {
        double distance;
        std::size_t index;
    };

    SpatialIndex() = default;
    explicit SpatialIndex(std::vector<Vec3> points);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// Euclidean distance to the closest indexed point; +inf when empty.
    double nearest_distance(const Vec3& query) const;

    /// Up to k closest points ordered by (distance, index).
    std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k) const;

  private:
    struct Node {
        std::uint32_t begin;
        std::uint32_t end;
        std::int32_t left = -1;
        std::int32_t right = -1;
        int axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);

    template <typename Visit>
    void search(std::int32_t node, const Vec3& query, double& bound_sq, Visit&& visit) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace progsplat
