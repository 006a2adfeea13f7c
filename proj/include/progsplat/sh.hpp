// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

namespace progsplat::sh {

inline constexpr int kMaxDegree = 3;
inline constexpr int kMaxCoeffs = 16;

/// Zeroth-order basis constant; maps DC coefficients to RGB via c = C0 * f_dc + 0.5.
inline constexpr double kC0 = 0.28209479177387814;

constexpr int coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real SH basis (standard 3DGS sign convention) evaluated at a unit direction.
/// Entries past coeff_count(degree) are zero.
std::array<double, kMaxCoeffs> basis(int degree, double x, double y, double z);

/// Jacobian of basis() with respect to (x, y, z), treating them as independent.
std::array<std::array<double, 3>, kMaxCoeffs> basis_jacobian(int degree, double x, double y, double z);

inline double rgb_to_dc(double c) { return (c - 0.5) / kC0; }
inline double dc_to_rgb(double f) { return kC0 * f + 0.5; }

} // namespace progsplat::sh
