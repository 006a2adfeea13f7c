// Copyright Contributors to the progsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "progsplat/pipeline.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace progsplat {

/// Sets one PhaseConfig field from its key=value spelling. Unknown keys and
/// unparsable values throw Config naming the key.
void set_config_value(PhaseConfig& config, std::string_view key, std::string_view value);

/// Plain-text key=value lines; '#' starts a comment.
PhaseConfig read_config(const std::filesystem::path& path, PhaseConfig base = {});

/// Comma-separated ablation names (no_field_update, no_image_weighting,
/// no_semiglobal, no_load, no_splat_parallel).
void apply_ablations(PhaseConfig& config, std::string_view list);

/// Every key accepted by set_config_value.
std::vector<std::string> config_keys();

std::string format_config(const PhaseConfig& config);

} // namespace progsplat
