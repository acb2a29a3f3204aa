#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "drfdm/engine.hpp"

namespace drfdm {

/// Applies one `key = value` setting. Keys match the long CLI flags with
/// dashes or underscores (e.g. `factor-set`, `tc`, `gamma`). Lists are comma
/// separated. Throws ParameterError on unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses key-value text (`#` starts a comment, blank lines ignored).
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "config");

/// Reads and applies a config file; a missing file is a DataError.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Checks the invariants of a config (non-empty grids, TC >= 0, gamma > 0, ...).
void validate(const RunConfig& config);

/// Every setting as (key, value) strings, in a fixed order, suitable for
/// reapplying with apply_setting.
std::vector<std::pair<std::string, std::string>> describe(const RunConfig& config);

/// Name of the environment variable holding the default config path.
inline constexpr const char* kConfigEnvVar = "DRFDM_CONFIG";

}  // namespace drfdm
