// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/types.hpp"

#include <filesystem>

namespace progsplat {

/// Binary P6, maxval 1..255; samples mapped to k / maxval.
Image read_ppm(const std::filesystem::path& path);

/// Writes binary P6 with values clamped to [0, 1] and rounded to 8 bits.
void write_ppm(const Image& image, const std::filesystem::path& path);

/// Box-filter downscale by an integer factor; dimensions must divide evenly.
Image downscale_image(const Image& image, int factor);

} // namespace progsplat
