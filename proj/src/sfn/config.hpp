#pragma once

// Flat key=value run configuration: registry, presets, files and snapshots.
//
// Resolution order is defaults < preset < checkpoint snapshot < file <
// command-line overrides; later sources win key by key.

#include <filesystem>
#include <string>
#include <vector>

#include "sfn/synthetic.hpp"
#include "sfn/training.hpp"

namespace sfn {

struct RunConfig {
  TrainConfig train;
  SynthConfig synth;
  SplitSpec split;
  MultiRepConfig multirep;
  std::vector<double> bucket_edges{5.0, 10.0, 20.0};
};

struct KeyInfo {
  std::string name;
  std::string description;
  std::string default_value;
};

/// Every accepted key in documentation order.
std::vector<KeyInfo> config_keys();

/// Throws `Error(unknown_key)` for an unregistered key and
/// `Error(invalid_argument)` for an unparsable value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const RunConfig& cfg, const std::string& key);

/// Applies `key = value` lines; blank lines and `#` comments are ignored.
/// `origin` names the source in error messages.
void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Parses and applies one `key=value` override.
void apply_override(RunConfig& cfg, const std::string& assignment);

std::vector<std::string> preset_names();
void apply_preset(RunConfig& cfg, const std::string& name);

/// Cross-field checks; the model input width follows `synth.d_in`.
void validate(const RunConfig& cfg);

/// Every key with its resolved value, one `key = value` line each.
std::string snapshot(const RunConfig& cfg);

inline constexpr const char* kSnapshotName = "resolved_config.txt";

}  // namespace sfn
