// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/field.hpp"

#include <filesystem>

namespace progsplat {

enum class PlyPrecision {
    /// Bit-exact round trip of the double-precision field.
    Float64,
    /// Layout expected by common splat viewers.
    Float32,
};

/// Binary little-endian PLY with x,y,z, nx,ny,nz (zero), f_dc_0..2,
/// f_rest_* (channel-major), opacity (logit), scale_0..2 (log), rot_0..3.
void write_ply(const GaussianField& field, const std::filesystem::path& path,
               PlyPrecision precision = PlyPrecision::Float64);

/// Reads the layout written by write_ply (float or double properties). The SH
/// degree is inferred from the f_rest count.
GaussianField read_ply(const std::filesystem::path& path);

} // namespace progsplat
