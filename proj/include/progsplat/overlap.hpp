// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/types.hpp"

#include <cstddef>
#include <limits>
#include <map>
#include <unordered_map>
#include <vector>

namespace progsplat {

/// Symmetric raw match counts between registered images.
class MatchMatrix {
  public:
    /// Throws InvalidParameter if the id is already registered.
    void register_image(ImageId id, int feature_count);
    bool contains(ImageId id) const { return entries_.count(id) != 0; }

    /// Sets the symmetric raw count for (i, j); both must be registered, i != j.
    void set_matches(ImageId i, ImageId j, int raw_count);
    int raw_matches(ImageId i, ImageId j) const;
    int feature_count(ImageId id) const;

    /// raw / min(feature counts), clamped to [0, 1].
    double normalized_overlap(ImageId i, ImageId j) const;

    /// Registered images in registration order.
    const std::vector<ImageId>& images() const { return order_; }
    std::size_t size() const { return order_.size(); }
    std::size_t registration_rank(ImageId id) const;

    /// Images sharing at least one match with id, ascending by id.
    const std::map<ImageId, int>& neighbors(ImageId id) const;

  private:
    struct Entry {
        int feature_count = 0;
        std::size_t rank = 0;
        std::map<ImageId, int> adjacency;
    };
    const Entry& entry(ImageId id) const;

    std::vector<ImageId> order_;
    std::unordered_map<ImageId, Entry> entries_;
};

inline constexpr int kUnreachableLayer = std::numeric_limits<int>::max();

using LayerAssignment = std::map<ImageId, int>;
using ImageWeights = std::map<ImageId, double>;

/// Breadth-first layering from the new image (layer 1) over the overlap graph.
LayerAssignment assign_layers(const MatchMatrix& matrix, ImageId new_image);

struct WeightOptions {
    /// Layers deeper than this get weight 0 without evaluation.
    int max_layer = 4;
};

ImageWeights compute_weights(const MatchMatrix& matrix, const LayerAssignment& layers, const WeightOptions& options = {});

} // namespace progsplat
