// SPDX-License-Identifier: Apache-2.0
//
// One flat configuration for every CLI subcommand, resolved from layered
// sources: built-in defaults < named preset < config file < command-line flags.

#ifndef ATLAS_EXPERIMENT_CONFIG_HPP
#define ATLAS_EXPERIMENT_CONFIG_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "atlas/diagnostics.hpp"
#include "atlas/harness.hpp"
#include "atlas/model.hpp"
#include "atlas/trainer.hpp"

namespace atlas {

struct ExperimentConfig {
  TrainConfig train;
  SyntheticTaskConfig task;
  ModelConfig model;
  DiagnosisConfig diagnosis;
  std::string preset = "default";
  std::string out_dir = "out";
  std::string data_dir;  // empty: generate the synthetic task in memory
  std::size_t seeds = 5;  // seed count for ablate
  std::string sweep_parameter = "theta";
  std::vector<double> sweep_values = {0.0, 0.05, 0.1, 0.2, 0.4};
  std::size_t repetitions = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

using Settings = std::map<std::string, std::string>;

/// Setting keys in canonical spelling, e.g. "tau-c" or "K".
const std::vector<std::string>& setting_keys();

/// Maps underscores to dashes so "tau_c" and "tau-c" name the same setting.
std::string canonical_key(const std::string& key);

/// Sets (K, theta, tau_c, alpha, force_delta) for "default", "base2new",
/// "fewshot" or "transfer".
void apply_preset(ExperimentConfig& cfg, const std::string& name);

/// Throws std::invalid_argument on an unknown key or unparsable value.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Later layers win. The preset named by the merged settings is applied
/// first, then every other setting, then the result is validated.
ExperimentConfig resolve_config(const Settings& config_file, const Settings& flags);

/// Every setting of `cfg`; resolve_config(to_settings(cfg), {}) reproduces it.
Settings to_settings(const ExperimentConfig& cfg);
void write_settings(std::ostream& out, const Settings& settings);

Settings read_settings(std::istream& in);
Settings load_settings(const std::string& path);

}  // namespace atlas

#endif  // ATLAS_EXPERIMENT_CONFIG_HPP
