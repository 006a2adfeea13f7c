// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"
#include "progsplat/pipeline.hpp"
#include "progsplat/scene.hpp"

#include <cstddef>
#include <unordered_set>
#include <vector>

namespace progsplat {

struct FlyInEvent {
    const CameraFrame* frame = nullptr;
    /// Every sparse point whose track includes the frame.
    std::vector<SparsePoint> candidates;
    /// Raw match counts against frames already yielded.
    std::vector<MatchEntry> match_row;
};

/// Yields the bundle's frames once each, in replay order.
class ReplayStream {
  public:
    explicit ReplayStream(const SceneBundle& bundle);

    bool done() const { return cursor_ >= bundle_->replay_order.size(); }
    std::size_t position() const { return cursor_; }
    std::size_t size() const { return bundle_->replay_order.size(); }

    FlyInEvent next();

  private:
    const SceneBundle* bundle_;
    std::size_t cursor_ = 0;
    std::vector<ImageId> yielded_;
};

} // namespace progsplat
