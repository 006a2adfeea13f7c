// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/optimizer.hpp"

#include "progsplat/error.hpp"

#include <cmath>

namespace progsplat {

void Optimizer::resize(std::size_t size) {
    m_.resize(size);
    v_.resize(size);
    steps_.resize(size, 0);
}

void Optimizer::remap(std::span<const std::ptrdiff_t> origin) {
    std::vector<Gaussian> m(origin.size()), v(origin.size());
    std::vector<std::uint32_t> steps(origin.size(), 0);
    for (std::size_t i = 0; i < origin.size(); ++i) {
        if (origin[i] < 0) continue;
        const auto src = static_cast<std::size_t>(origin[i]);
        if (src >= m_.size()) fail(ErrorCode::ContractViolation, "optimizer remap index out of range");
        m[i] = m_[src];
        v[i] = v_[src];
        steps[i] = steps_[src];
    }
    m_ = std::move(m);
    v_ = std::move(v);
    steps_ = std::move(steps);
}

void Optimizer::step(GaussianField& field, std::span<const Gaussian> grads, std::span<const std::uint8_t> visible,
                     double position_rate, const ClassRates& rates) {
    if (grads.size() != field.size() || visible.size() != field.size() || steps_.size() != field.size()) {
        fail(ErrorCode::DimensionMismatch, "optimizer state does not match the field");
    }
    const int sh_params = sh::coeff_count(field.sh_degree) * 3;
    double rate_of[Gaussian::kParamCount];
    for (int k = 0; k < Gaussian::kParamCount; ++k) {
        switch (param_class(k)) {
        case ParamClass::Position: rate_of[k] = position_rate; break;
        case ParamClass::Rotation: rate_of[k] = rates.rotation; break;
        case ParamClass::Scale: rate_of[k] = rates.scale; break;
        case ParamClass::Opacity: rate_of[k] = rates.opacity; break;
        case ParamClass::Sh: rate_of[k] = (k - 11) < 3 ? rates.sh_dc : rates.sh_rest; break;
        }
    }
    const int active = 11 + sh_params;

    for (std::size_t i = 0; i < field.size(); ++i) {
        if (!visible[i]) continue;
        const std::uint32_t t = ++steps_[i];
        const double bc1 = 1.0 - std::pow(kBeta1, t);
        const double bc2 = 1.0 - std::pow(kBeta2, t);
        Gaussian& p = field.gaussians[i];
        for (int k = 0; k < active; ++k) {
            const double g = grads[i].param(k);
            double& m = m_[i].param(k);
            double& v = v_[i].param(k);
            m = kBeta1 * m + (1.0 - kBeta1) * g;
            v = kBeta2 * v + (1.0 - kBeta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.param(k) -= rate_of[k] * mhat / (std::sqrt(vhat) + kEpsilon);
        }
    }
}

} // namespace progsplat
