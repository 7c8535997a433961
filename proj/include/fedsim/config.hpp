// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedsim/error.hpp"
#include "fedsim/federation.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Run configuration files: plain-text "key = value" lines, '#' comments.
// Unknown keys are rejected with a line-anchored message; missing keys take
// the documented defaults. The resolved configuration can be snapshotted as a
// canonical document.
// ---------------------------------------------------------------------------
struct ParsedConfig {
  FederationConfig cfg;
  std::vector<std::string> methods;  // >1 only meaningful for sweeps
  std::string out_dir;
  std::vector<std::string> warnings;
};

ParsedConfig parse_config_text(const std::string& text,
                               const std::string& source_name);
ParsedConfig load_config_file(const std::string& path);

// Applies one key=value pair (same key set as the file). Throws ConfigError
// on unknown keys or bad values.
void apply_config_entry(ParsedConfig& pc, const std::string& key,
                        const std::string& value, const std::string& where);

// Canonical resolved key=value document (every key, fixed order), prefixed
// with tool and schema identification.
std::string config_snapshot(const ParsedConfig& pc);

// Sweep axes: clients, data_ratio, alpha_label, learning_rate.
struct SweepSpec {
  std::string axis;
  std::vector<double> values;
};

SweepSpec parse_sweep_spec(const std::string& axis, const std::string& values_csv);
// Appends a warning per value falling outside the default grid for the axis.
void check_sweep_grid(const SweepSpec& spec, std::vector<std::string>& warnings);

constexpr int kSchemaVersion = 1;
const char* tool_version();

}  // namespace fedsim
