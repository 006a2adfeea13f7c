// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace progsplat {

/// Fixed per-class learning rates; positions take their rate per step.
struct ClassRates {
    double rotation = 0.001;
    double scale = 0.005;
    double opacity = 0.05;
    double sh_dc = 0.0025;
    double sh_rest = 0.0025 / 20.0;
};

/// Bias-corrected adaptive-moment optimizer over a GaussianField. Moments and
/// step counters are kept per Gaussian; only Gaussians flagged visible in a
/// step are updated.
class Optimizer {
  public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-15;

    Optimizer() = default;
    explicit Optimizer(std::size_t size) { resize(size); }

    std::size_t size() const { return steps_.size(); }

    /// Grows (zero moments for new entries) or shrinks to match the field.
    void resize(std::size_t size);

    /// Reorders after densify_and_prune: origin[i] is the pre-call index of
    /// Gaussian i, or -1 for a fresh Gaussian (moments reset).
    void remap(std::span<const std::ptrdiff_t> origin);

    void step(GaussianField& field, std::span<const Gaussian> grads, std::span<const std::uint8_t> visible,
              double position_rate, const ClassRates& rates);

    const Gaussian& first_moment(std::size_t i) const { return m_[i]; }
    const Gaussian& second_moment(std::size_t i) const { return v_[i]; }
    std::uint32_t steps(std::size_t i) const { return steps_[i]; }

  private:
    std::vector<Gaussian> m_;
    std::vector<Gaussian> v_;
    std::vector<std::uint32_t> steps_;
};

} // namespace progsplat
