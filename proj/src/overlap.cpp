// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/overlap.hpp"

#include "progsplat/error.hpp"

#include <algorithm>
#include <deque>

namespace progsplat {

void MatchMatrix::register_image(ImageId id, int feature_count) {
    if (contains(id)) fail(ErrorCode::InvalidParameter, "image " + std::to_string(id) + " already registered");
    if (feature_count < 0) fail(ErrorCode::InvalidParameter, "feature count must be >= 0");
    Entry e;
    e.feature_count = feature_count;
    e.rank = order_.size();
    entries_.emplace(id, std::move(e));
    order_.push_back(id);
}

const MatchMatrix::Entry& MatchMatrix::entry(ImageId id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) fail(ErrorCode::NotFound, "image " + std::to_string(id) + " is not registered");
    return it->second;
}

void MatchMatrix::set_matches(ImageId i, ImageId j, int raw_count) {
    entry(i);
    entry(j);
    if (i == j) fail(ErrorCode::InvalidParameter, "match counts on the diagonal are unused");
    if (raw_count < 0) fail(ErrorCode::InvalidParameter, "match count must be >= 0");
    auto& ai = entries_.at(i).adjacency;
    auto& aj = entries_.at(j).adjacency;
    if (raw_count == 0) {
        ai.erase(j);
        aj.erase(i);
    } else {
        ai[j] = raw_count;
        aj[i] = raw_count;
    }
}

int MatchMatrix::raw_matches(ImageId i, ImageId j) const {
    const auto& adj = entry(i).adjacency;
    entry(j);
    const auto it = adj.find(j);
    return it == adj.end() ? 0 : it->second;
}

int MatchMatrix::feature_count(ImageId id) const { return entry(id).feature_count; }

std::size_t MatchMatrix::registration_rank(ImageId id) const { return entry(id).rank; }

const std::map<ImageId, int>& MatchMatrix::neighbors(ImageId id) const { return entry(id).adjacency; }

double MatchMatrix::normalized_overlap(ImageId i, ImageId j) const {
    const int raw = raw_matches(i, j);
    if (raw == 0) return 0.0;
    const int denom = std::min(feature_count(i), feature_count(j));
    if (denom <= 0) return 1.0;
    return std::clamp(static_cast<double>(raw) / denom, 0.0, 1.0);
}

LayerAssignment assign_layers(const MatchMatrix& matrix, ImageId new_image) {
    matrix.registration_rank(new_image); // throws NotFound
    LayerAssignment layers;
    for (ImageId id : matrix.images()) layers[id] = kUnreachableLayer;
    layers[new_image] = 1;
    std::deque<ImageId> queue{new_image};
    while (!queue.empty()) {
        const ImageId cur = queue.front();
        queue.pop_front();
        for (const auto& [nb, count] : matrix.neighbors(cur)) {
            if (count > 0 && layers[nb] == kUnreachableLayer) {
                layers[nb] = layers[cur] + 1;
                queue.push_back(nb);
            }
        }
    }
    return layers;
}

ImageWeights compute_weights(const MatchMatrix& matrix, const LayerAssignment& layers, const WeightOptions& options) {
    std::map<int, std::vector<ImageId>> by_layer;
    for (const auto& [id, layer] : layers) by_layer[layer].push_back(id);
    const auto first = by_layer.find(1);
    if (first == by_layer.end() || first->second.size() != 1) {
        fail(ErrorCode::InvalidParameter, "layer assignment must contain exactly one layer-1 image");
    }

    ImageWeights weights;
    for (const auto& [id, layer] : layers) weights[id] = 0.0;
    weights[first->second.front()] = 1.0;

    // Layer k: mean over all N_{k-1} images of layer k-1 of w_j * M(j, i).
    // Layer 2 reduces to M(i, new) since layer 1 is the single new image.
    for (int k = 2; k <= options.max_layer; ++k) {
        const auto cur = by_layer.find(k);
        const auto prev = by_layer.find(k - 1);
        if (cur == by_layer.end() || prev == by_layer.end()) break;
        const double n_prev = static_cast<double>(prev->second.size());
        for (ImageId i : cur->second) {
            double sum = 0.0;
            for (ImageId j : prev->second) sum += weights[j] * matrix.normalized_overlap(j, i);
            weights[i] = sum / n_prev;
        }
    }
    return weights;
}

} // namespace progsplat
