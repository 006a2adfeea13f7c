// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace progsplat {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

SpatialIndex::SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 1);
        build(0, static_cast<std::uint32_t>(points_.size()), 0);
    }
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    // Split on the axis of largest spread.
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) return id; // all coincident: keep as a leaf

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];

    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

// Points in the left child have coord <= split, in the right child >= split.
template <typename Visit>
void SpatialIndex::search(std::int32_t node_id, const Vec3& query, double& bound_sq, Visit&& visit) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            visit((points_[idx] - query).squaredNorm(), idx);
        }
        return;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near_child = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far_child = diff <= 0.0 ? node.right : node.left;
    search(near_child, query, bound_sq, visit);
    if (diff * diff <= bound_sq) search(far_child, query, bound_sq, visit);
}

double SpatialIndex::nearest_distance(const Vec3& query) const {
    if (points_.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    search(0, query, best, [&](double d2, std::uint32_t) {
        if (d2 < best) best = d2;
    });
    return std::sqrt(best);
}

std::vector<SpatialIndex::Neighbor> SpatialIndex::k_nearest(const Vec3& query, std::size_t k) const {
    std::vector<std::pair<double, std::uint32_t>> heap; // max-heap on (d2, index)
    if (points_.empty() || k == 0) return {};
    double bound = std::numeric_limits<double>::infinity();
    search(0, query, bound, [&](double d2, std::uint32_t idx) {
        const std::pair<double, std::uint32_t> cand{d2, idx};
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end());
        }
        if (heap.size() == k) bound = heap.front().first;
    });
    std::sort(heap.begin(), heap.end());
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back({std::sqrt(d2), idx});
    return out;
}

} // namespace progsplat
