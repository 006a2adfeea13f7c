// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/overlap.hpp"
#include "progsplat/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace progsplat {

/// Per-image count of iterations in which the image was the render target.
class TrainingState {
  public:
    void record(ImageId id);
    std::uint64_t iterations(ImageId id) const;
    std::uint64_t global_iterations() const { return global_; }
    const std::map<ImageId, std::uint64_t>& counts() const { return counts_; }

  private:
    std::map<ImageId, std::uint64_t> counts_;
    std::uint64_t global_ = 0;
};

struct LrSchedule {
    double initial = 1.6e-4;
    double final = 1.6e-6;
    double target_iters = 200.0;
};

/// Log-linear interpolation from initial to final over target_iters, then flat.
double lr_single(double trained_iters, const LrSchedule& schedule);

/// Own rate blended with overlap-weighted neighbour rates:
/// (own + sum_i M(i,j) * rate_i) / (N + 1).
double lr_blended(ImageId id, const MatchMatrix& matrix, const TrainingState& state, const LrSchedule& schedule);

/// Integer split of `total` proportional to 1 - exp(-w) (largest remainder).
std::vector<int> allocate_proportional(std::span<const double> weights, int total);

/// Local half of a fly-in event: allocate_proportional(weights, iters / 2).
std::vector<int> allocate_local(std::span<const double> weights, int iterations_per_event);

struct PlanOptions {
    int iterations_per_event = 200;
    int key_images = 10;
    bool interleave = true;
    /// false: the whole budget goes to the key images.
    bool semi_global = true;
    /// true: every key image gets the same weight (selection still by weight).
    bool uniform_key_weights = false;
};

struct IterationPlan {
    std::vector<ImageId> entries;
    std::vector<ImageId> keys;
    std::vector<int> key_allocation;
    int local_total = 0;
    int semi_global_total = 0;
};

/// Top-N_m images by weight (ties: most recently registered first) receive the
/// local half; the semi-global half is drawn without replacement from the rest.
IterationPlan build_plan(const ImageWeights& weights, std::span<const ImageId> registration_order,
                         const PlanOptions& options, std::uint64_t seed);

} // namespace progsplat
