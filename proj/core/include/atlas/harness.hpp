// SPDX-License-Identifier: Apache-2.0
//
// Experiment plumbing: synthetic base-to-new tasks, accuracy evaluation on
// class subsets, parameter sweeps and the ablation grid.

#ifndef ATLAS_HARNESS_HPP
#define ATLAS_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atlas/model.hpp"
#include "atlas/trainer.hpp"

namespace atlas {

struct SyntheticTaskConfig {
  std::size_t base_classes = 4;
  std::size_t new_classes = 4;
  std::size_t shots = 16;       // training images per base class
  std::size_t test_shots = 32;  // test images per class, base and new
  double noise_std = 0.3;       // per-coordinate image noise
  /// Length of the shared image offset relative to the mean prototype norm.
  /// The prompt can learn to absorb it, which is what makes tuning useful.
  double domain_shift = 1.0;
  /// Correlation between a class token and its latent concept.
  double token_correlation = 0.8;
  ModelDims dims;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Everything needed to train on base classes and evaluate on base and new.
/// Classes [0, base_classes) are base, the rest are new. Training labels
/// range over base classes only; test labels range over all classes.
struct Task {
  std::vector<ImageSample> train;
  std::vector<ImageSample> test;
  ClassVocabulary vocab;
  FrozenEncoder encoder;
  PromptParams init_prompt;
  std::size_t base_classes = 0;

  std::size_t num_classes() const noexcept { return vocab.size(); }
  std::size_t new_classes() const noexcept { return vocab.size() - base_classes; }
  ModelParts base_parts(const ModelConfig& model) const;
  ModelParts all_parts(const ModelConfig& model) const;
  std::vector<std::size_t> base_subset() const;
  std::vector<std::size_t> new_subset() const;
};

struct EvalResult {
  double base_acc = 0.0;
  double new_acc = 0.0;
  double harmonic_mean = 0.0;

  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

Task generate_task(const SyntheticTaskConfig& cfg);

/// Accuracy over samples whose label is in `subset`, predicting the argmax of
/// the class logits restricted to `subset` (lowest class index on ties).
/// Throws std::invalid_argument if the subset is empty or no sample matches.
double evaluate(const PromptParams& v, std::span<const ImageSample> samples,
                const ModelParts& parts, std::span<const std::size_t> subset);

/// 2ab / (a + b), and 0 when both are zero.
double harmonic_mean(double base_acc, double new_acc);

EvalResult evaluate_base_new(const PromptParams& v, const Task& task, const ModelConfig& model);

/// CSL from the class text embeddings at the initial prompt, ISL from the
/// zero-shot predictions at the same prompt, both over base classes. Only
/// tables the mode needs are built unless `all` is set.
LabelTables build_tables(const Task& task, const TrainConfig& cfg, const ModelConfig& model,
                         bool all = false);

struct TrainedRun {
  TrainReport report;
  EvalResult eval;
};

TrainedRun train_and_evaluate(const Task& task, const TrainConfig& cfg, const ModelConfig& model);

struct SweepSpec {
  std::string parameter;  // theta, tau_c, alpha, K or w
  std::vector<double> values;
  std::size_t repetitions = 1;

  void validate() const;
};

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  std::uint64_t seed = 0;
  EvalResult eval;
};

/// Trains and evaluates once per grid value and repetition; repetition r
/// uses seed base.seed + r.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const TrainConfig& base,
                                const ModelConfig& model, const Task& task);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::istream& in);
/// Median base/new/H per grid value, plotted against the swept parameter.
void write_sweep_svg(std::ostream& out, const std::vector<SweepRow>& rows);

struct AblationRow {
  std::string mode;
  std::uint64_t seed = 0;
  EvalResult eval;
};

struct AblationTable {
  std::vector<AblationRow> rows;     // per mode per seed
  std::vector<AblationRow> medians;  // one per mode
};

/// The ten supervision modes of the ablation, baseline first.
std::vector<TrainMode> ablation_modes();

AblationTable run_ablation_grid(const Task& task, const TrainConfig& base,
                                const ModelConfig& model, std::size_t num_seeds);

void write_ablation_csv(std::ostream& out, const AblationTable& table);

double median(std::vector<double> values);

struct DirectionalResult {
  double median_new_onehot = 0.0;
  double median_new_atlas_isl = 0.0;
  double median_h_soft_only = 0.0;
  double median_h_alternating = 0.0;
  bool isl_beats_onehot_on_new = false;
  bool alternating_beats_soft_only_on_h = false;
};

/// Regenerates the task with seeds task_cfg.seed + s for s < num_seeds and
/// compares medians across seeds.
DirectionalResult run_directional_check(const SyntheticTaskConfig& task_cfg,
                                        const TrainConfig& base, const ModelConfig& model,
                                        std::size_t num_seeds);

}  // namespace atlas

#endif  // ATLAS_HARNESS_HPP
