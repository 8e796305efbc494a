// SPDX-License-Identifier: Apache-2.0

#include "atlas/experiment_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "atlas/csv.hpp"

namespace atlas {

namespace {

double to_double(const std::string& key, const std::string& value) {
  try {
    return csv::parse_double(value, 0);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected a number, got '" + value + "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    return csv::parse_int(value, 0);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected an integer, got '" + value + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const long long v = to_int(key, value);
  if (v < 0) throw std::invalid_argument(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw std::invalid_argument(key + ": expected a boolean, got '" + value + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& f : csv::split(value)) {
    if (!f.empty()) out.push_back(to_double(key, f));
  }
  if (out.empty()) throw std::invalid_argument(key + ": empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"preset", [](auto& c, auto&, auto& v) { c.preset = v; }},
      {"out", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
      {"data", [](auto& c, auto&, auto& v) { c.data_dir = v; }},
      {"seed",
       [](auto& c, auto& k, auto& v) {
         const auto s = static_cast<std::uint64_t>(to_count(k, v));
         c.train.seed = s;
         c.task.seed = s;
         c.diagnosis.seed = s;
       }},
      {"mode", [](auto& c, auto&, auto& v) { c.train.mode = TrainMode::parse(v, c.train.mode.mix_weight); }},
      {"mix-weight", [](auto& c, auto& k, auto& v) { c.train.mode.mix_weight = to_double(k, v); }},
      {"eta", [](auto& c, auto& k, auto& v) { c.train.eta = to_double(k, v); }},
      {"epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = static_cast<int>(to_int(k, v)); }},
      {"batch-size", [](auto& c, auto& k, auto& v) { c.train.batch_size = to_count(k, v); }},
      {"K",
       [](auto& c, auto& k, auto& v) {
         c.train.K = static_cast<int>(to_int(k, v));
         c.diagnosis.K = c.train.K;
       }},
      {"theta",
       [](auto& c, auto& k, auto& v) {
         c.train.theta = to_double(k, v);
         c.diagnosis.theta = c.train.theta;
       }},
      {"tau-c", [](auto& c, auto& k, auto& v) { c.train.tau_c = to_double(k, v); }},
      {"alpha", [](auto& c, auto& k, auto& v) { c.train.alpha = to_double(k, v); }},
      {"force-delta", [](auto& c, auto& k, auto& v) { c.train.force_delta = to_bool(k, v); }},
      {"tau", [](auto& c, auto& k, auto& v) { c.model.tau = to_double(k, v); }},
      {"c-base", [](auto& c, auto& k, auto& v) { c.task.base_classes = to_count(k, v); }},
      {"c-new", [](auto& c, auto& k, auto& v) { c.task.new_classes = to_count(k, v); }},
      {"shots", [](auto& c, auto& k, auto& v) { c.task.shots = to_count(k, v); }},
      {"test-shots", [](auto& c, auto& k, auto& v) { c.task.test_shots = to_count(k, v); }},
      {"noise-std", [](auto& c, auto& k, auto& v) { c.task.noise_std = to_double(k, v); }},
      {"domain-shift", [](auto& c, auto& k, auto& v) { c.task.domain_shift = to_double(k, v); }},
      {"token-correlation",
       [](auto& c, auto& k, auto& v) { c.task.token_correlation = to_double(k, v); }},
      {"M", [](auto& c, auto& k, auto& v) { c.task.dims.prompt_length = to_count(k, v); }},
      {"d-p", [](auto& c, auto& k, auto& v) { c.task.dims.prompt_dim = to_count(k, v); }},
      {"d-cls", [](auto& c, auto& k, auto& v) { c.task.dims.token_dim = to_count(k, v); }},
      {"d-t", [](auto& c, auto& k, auto& v) { c.task.dims.embed_dim = to_count(k, v); }},
      {"seeds", [](auto& c, auto& k, auto& v) { c.seeds = to_count(k, v); }},
      {"sweep-param", [](auto& c, auto&, auto& v) { c.sweep_parameter = v; }},
      {"sweep-values", [](auto& c, auto& k, auto& v) { c.sweep_values = to_list(k, v); }},
      {"reps", [](auto& c, auto& k, auto& v) { c.repetitions = to_count(k, v); }},
      {"T", [](auto& c, auto& k, auto& v) { c.diagnosis.T = to_count(k, v); }},
      {"diag-batch", [](auto& c, auto& k, auto& v) { c.diagnosis.batch_size = to_count(k, v); }},
      {"probes", [](auto& c, auto& k, auto& v) { c.diagnosis.beta_probes = to_count(k, v); }},
      {"radius", [](auto& c, auto& k, auto& v) { c.diagnosis.beta_radius = to_double(k, v); }},
      {"checkpoint-interval",
       [](auto& c, auto& k, auto& v) { c.diagnosis.checkpoint_interval = to_count(k, v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  task.validate();
  if (!(model.tau > 0.0) || !std::isfinite(model.tau)) {
    throw std::invalid_argument("tau must be positive");
  }
  if (seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  SweepSpec{sweep_parameter, sweep_values, repetitions}.validate();
  if (diagnosis.T < 1) throw std::invalid_argument("T must be >= 1");
  if (diagnosis.batch_size < 1) throw std::invalid_argument("diag-batch must be >= 1");
  if (diagnosis.beta_probes < 10) throw std::invalid_argument("probes must be >= 10");
  if (!(diagnosis.beta_radius > 0.0)) throw std::invalid_argument("radius must be positive");
  if (diagnosis.checkpoint_interval < 1) {
    throw std::invalid_argument("checkpoint-interval must be >= 1");
  }
  if (out_dir.empty()) throw std::invalid_argument("out must not be empty");
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::string canonical_key(const std::string& key) {
  std::string out = key;
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

void apply_preset(ExperimentConfig& cfg, const std::string& name) {
  struct Preset {
    int K;
    double theta, tau_c, alpha;
    bool force_delta;
  };
  Preset p{};
  if (name == "default" || name == "base2new") {
    p = {2, 0.1, 0.05, 0.1, false};
  } else if (name == "fewshot") {
    p = {3, 0.05, 0.02, 0.1, true};
  } else if (name == "transfer") {
    p = {3, 0.1, 0.04, 1.0, false};
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (expected default, base2new, fewshot or transfer)");
  }
  cfg.preset = name;
  cfg.train.K = p.K;
  cfg.train.theta = p.theta;
  cfg.train.tau_c = p.tau_c;
  cfg.train.alpha = p.alpha;
  cfg.train.force_delta = p.force_delta;
  cfg.diagnosis.K = p.K;
  cfg.diagnosis.theta = p.theta;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const std::string k = canonical_key(key);
  for (const auto& [name, fn] : setters()) {
    if (name == k) {
      fn(cfg, k, value);
      return;
    }
  }
  throw std::invalid_argument("unknown setting '" + key + "'");
}

ExperimentConfig resolve_config(const Settings& config_file, const Settings& flags) {
  Settings merged;
  for (const auto& [k, v] : config_file) merged[canonical_key(k)] = v;
  for (const auto& [k, v] : flags) merged[canonical_key(k)] = v;

  ExperimentConfig cfg;
  auto preset = merged.find("preset");
  apply_preset(cfg, preset == merged.end() ? std::string("default") : preset->second);
  // "mode" before "mix-weight" does not matter; both setters keep the other's value.
  for (const auto& [k, v] : merged) {
    if (k != "preset") apply_setting(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

Settings to_settings(const ExperimentConfig& cfg) {
  const auto d = [](double x) { return csv::format_double(x); };
  const auto n = [](auto x) { return std::to_string(x); };
  std::string values;
  for (double v : cfg.sweep_values) values += (values.empty() ? "" : ",") + d(v);
  TrainMode mode = cfg.train.mode;
  return {
      {"preset", cfg.preset},
      {"out", cfg.out_dir},
      {"data", cfg.data_dir},
      {"seed", n(cfg.train.seed)},
      {"mode", mode.name()},
      {"mix-weight", d(mode.mix_weight)},
      {"eta", d(cfg.train.eta)},
      {"epochs", n(cfg.train.epochs)},
      {"batch-size", n(cfg.train.batch_size)},
      {"K", n(cfg.train.K)},
      {"theta", d(cfg.train.theta)},
      {"tau-c", d(cfg.train.tau_c)},
      {"alpha", d(cfg.train.alpha)},
      {"force-delta", cfg.train.force_delta ? "true" : "false"},
      {"tau", d(cfg.model.tau)},
      {"c-base", n(cfg.task.base_classes)},
      {"c-new", n(cfg.task.new_classes)},
      {"shots", n(cfg.task.shots)},
      {"test-shots", n(cfg.task.test_shots)},
      {"noise-std", d(cfg.task.noise_std)},
      {"domain-shift", d(cfg.task.domain_shift)},
      {"token-correlation", d(cfg.task.token_correlation)},
      {"M", n(cfg.task.dims.prompt_length)},
      {"d-p", n(cfg.task.dims.prompt_dim)},
      {"d-cls", n(cfg.task.dims.token_dim)},
      {"d-t", n(cfg.task.dims.embed_dim)},
      {"seeds", n(cfg.seeds)},
      {"sweep-param", cfg.sweep_parameter},
      {"sweep-values", values},
      {"reps", n(cfg.repetitions)},
      {"T", n(cfg.diagnosis.T)},
      {"diag-batch", n(cfg.diagnosis.batch_size)},
      {"probes", n(cfg.diagnosis.beta_probes)},
      {"radius", d(cfg.diagnosis.beta_radius)},
      {"checkpoint-interval", n(cfg.diagnosis.checkpoint_interval)},
  };
}

void write_settings(std::ostream& out, const Settings& settings) {
  for (const auto& [k, v] : settings) out << k << '=' << v << '\n';
}

Settings read_settings(std::istream& in) { return csv::parse_key_values(in); }

Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  try {
    return read_settings(in);
  } catch (const csv::ParseError& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

}  // namespace atlas
