// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#include "progsplat/sh.hpp"

namespace progsplat::sh {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};

} // namespace

std::array<double, kMaxCoeffs> basis(int degree, double x, double y, double z) {
    std::array<double, kMaxCoeffs> b{};
    b[0] = kC0;
    if (degree < 1) return b;
    b[1] = -kC1 * y;
    b[2] = kC1 * z;
    b[3] = -kC1 * x;
    if (degree < 2) return b;
    const double xx = x * x, yy = y * y, zz = z * z;
    b[4] = kC2[0] * x * y;
    b[5] = kC2[1] * y * z;
    b[6] = kC2[2] * (2.0 * zz - xx - yy);
    b[7] = kC2[3] * x * z;
    b[8] = kC2[4] * (xx - yy);
    if (degree < 3) return b;
    b[9] = kC3[0] * y * (3.0 * xx - yy);
    b[10] = kC3[1] * x * y * z;
    b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    b[14] = kC3[5] * z * (xx - yy);
    b[15] = kC3[6] * x * (xx - 3.0 * yy);
    return b;
}

std::array<std::array<double, 3>, kMaxCoeffs> basis_jacobian(int degree, double x, double y, double z) {
    std::array<std::array<double, 3>, kMaxCoeffs> j{};
    if (degree < 1) return j;
    j[1] = {0.0, -kC1, 0.0};
    j[2] = {0.0, 0.0, kC1};
    j[3] = {-kC1, 0.0, 0.0};
    if (degree < 2) return j;
    const double xx = x * x, yy = y * y, zz = z * z;
    j[4] = {kC2[0] * y, kC2[0] * x, 0.0};
    j[5] = {0.0, kC2[1] * z, kC2[1] * y};
    j[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
    j[7] = {kC2[3] * z, 0.0, kC2[3] * x};
    j[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0.0};
    if (degree < 3) return j;
    j[9] = {kC3[0] * 6.0 * x * y, kC3[0] * (3.0 * xx - 3.0 * yy), 0.0};
    j[10] = {kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y};
    j[11] = {kC3[2] * -2.0 * x * y, kC3[2] * (4.0 * zz - xx - 3.0 * yy), kC3[2] * 8.0 * y * z};
    j[12] = {kC3[3] * -6.0 * x * z, kC3[3] * -6.0 * y * z, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
    j[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), kC3[4] * -2.0 * x * y, kC3[4] * 8.0 * x * z};
    j[14] = {kC3[5] * 2.0 * x * z, kC3[5] * -2.0 * y * z, kC3[5] * (xx - yy)};
    j[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), kC3[6] * -6.0 * x * y, 0.0};
    return j;
}

} // namespace progsplat::sh
