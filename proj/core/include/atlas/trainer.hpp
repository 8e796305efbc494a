// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD over the prompt vectors with selectable supervision:
// plain one-hot, soft labels only, soft + one-hot jointly, or the
// alternating schedule (K - 1 one-hot epochs, then one soft-label epoch).

#ifndef ATLAS_TRAINER_HPP
#define ATLAS_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atlas/labels.hpp"
#include "atlas/model.hpp"

namespace atlas {

enum class TrainVariant { OneHot, SoftOnly, JointWithY, Alternating };
enum class LabelSource { UniformLS, CSL, ISL, Mix };

struct TrainMode {
  TrainVariant variant = TrainVariant::OneHot;
  LabelSource source = LabelSource::UniformLS;
  double mix_weight = 0.5;  // weight of the CSL label when source == Mix

  bool needs_csl() const noexcept;
  bool needs_isl() const noexcept;

  /// CLI spelling: onehot, ls, ls+y, atlas, csl, csl+y, atlas-csl, isl,
  /// isl+y, atlas-isl, mix, mix+y, atlas-mix.
  std::string name() const;
  static TrainMode parse(const std::string& name, double mix_weight = 0.5);

  friend bool operator==(const TrainMode&, const TrainMode&) = default;
};

struct TrainConfig {
  double eta = 0.5;
  int epochs = 10;
  std::size_t batch_size = 8;
  int K = 2;
  double theta = 0.1;
  double tau_c = 0.05;
  double alpha = 0.1;
  bool force_delta = false;
  std::uint64_t seed = 0;
  TrainMode mode{TrainVariant::Alternating, LabelSource::UniformLS};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Offline soft-label stores; which ones must be present depends on the mode.
struct LabelTables {
  std::optional<CslTable> csl;
  std::optional<IslTable> isl;
};

struct EpochRecord {
  int epoch = 0;
  int xi = 1;
  double mean_loss = 0.0;
  double mean_sq_grad_norm = 0.0;
  double train_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  PromptParams final_prompt;
  double eta = 0.0;
  std::size_t total_steps = 0;
  double wall_seconds = 0.0;
};

/// Called with (global step t, v_t) right before the update v_t -> v_{t+1}.
using StepObserver = std::function<void(std::size_t, const PromptParams&)>;

/// Shuffled mini-batches for one epoch; the order depends only on (seed, epoch).
std::vector<std::vector<std::size_t>> batch_iterator(std::size_t n, std::size_t batch_size,
                                                     int epoch, std::uint64_t seed);

/// Label used for one sample given the phase indicator xi.
ProbabilityVector supervision_for(const ImageSample& sample, int xi, const TrainMode& mode,
                                  const LabelTables& tables, const TrainConfig& cfg);

/// Phase indicator for an epoch after applying the mode (OneHot forces 1,
/// SoftOnly and JointWithY force 0).
int phase_for_mode(int epoch, const TrainMode& mode, int K);

/// Per-sample objective under the mode: one CE term, or the unweighted sum
/// of the soft and one-hot CE terms for JointWithY.
SampleEvaluation training_objective(const PromptParams& v, const ImageSample& sample, int xi,
                                    const ModelParts& parts, const LabelTables& tables,
                                    const TrainConfig& cfg);

TrainReport run_training(std::span<const ImageSample> data, const ModelParts& parts,
                         const PromptParams& init, const LabelTables& tables,
                         const TrainConfig& cfg, const StepObserver& observer = {});

/// "epoch,xi,mean_loss,mean_sq_grad_norm,train_acc" plus one row per epoch.
void write_train_report_csv(std::ostream& out, const TrainReport& report);
std::vector<EpochRecord> read_train_report_csv(std::istream& in);

}  // namespace atlas

#endif  // ATLAS_TRAINER_HPP
