// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/replay.hpp"

#include "progsplat/error.hpp"

namespace progsplat {

ReplayStream::ReplayStream(const SceneBundle& bundle) : bundle_(&bundle) {
    std::unordered_set<ImageId> seen;
    for (ImageId id : bundle.replay_order) {
        bundle.frame(id);
        if (!seen.insert(id).second) {
            fail(ErrorCode::InvalidParameter, "replay order repeats image " + std::to_string(id));
        }
    }
}

FlyInEvent ReplayStream::next() {
    if (done()) fail(ErrorCode::ContractViolation, "replay stream exhausted");
    const ImageId id = bundle_->replay_order[cursor_++];
    FlyInEvent event;
    event.frame = &bundle_->frame(id);
    if (const auto it = bundle_->image_points.find(id); it != bundle_->image_points.end()) {
        event.candidates.reserve(it->second.size());
        for (std::size_t p : it->second) {
            const ScenePoint& point = bundle_->points[p];
            event.candidates.push_back({point.position, point.color});
        }
    }
    for (ImageId other : yielded_) {
        const int count = bundle_->match_count(id, other);
        if (count > 0) event.match_row.push_back({other, count});
    }
    yielded_.push_back(id);
    return event;
}

} // namespace progsplat
