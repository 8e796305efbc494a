// SPDX-License-Identifier: Apache-2.0
//
// Empirical counterparts of the convergence analysis: full-batch gradient,
// one-hot gradient variance (sigma^2), uniform-label deviation
// (sigma_hat^2 = kappa * sigma^2), smoothness probing, the per-step
// gradient-deviation inequalities for alternating and plain label
// smoothing, and the resulting stationarity bounds.
//
// The dataset stands in for the data distribution, so every expectation
// here is an exact mean over samples.

#ifndef ATLAS_DIAGNOSTICS_HPP
#define ATLAS_DIAGNOSTICS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atlas/model.hpp"
#include "atlas/trainer.hpp"

namespace atlas {

struct VarianceEstimate {
  double sigma2 = 0.0;      // mean |grad F - grad l(y)|^2
  double sigma_hat2 = 0.0;  // mean |grad F - grad l(uniform)|^2
  double kappa = 0.0;       // sigma_hat2 / sigma2
};

struct InequalityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct BoundInputs {
  double F0 = 0.0;
  double eta = 0.0;
  std::size_t T = 0;
  double theta = 0.0;
  int K = 1;
  double kappa = 0.0;
  double sigma2 = 0.0;
  double beta_hat = 0.0;
};

struct BoundReport {
  double atlas_bound = 0.0;
  double ls_bound = 0.0;
  double measured_avg_sq_grad = 0.0;
  double lemma2_lhs = 0.0;
  double lemma2_rhs = 0.0;
  double lemma3_lhs = 0.0;
  double lemma3_rhs = 0.0;
  bool lemma2_pass = false;
  bool lemma3_pass = false;
  bool theorem1_pass = false;
  /// atlas_bound < ls_bound, which should coincide with kappa > 1.
  bool atlas_tighter = false;
  BoundInputs inputs;
};

/// Slack applied to the stationarity bound to absorb smoothness estimation error.
inline constexpr double kTheorem1Slack = 0.05;
/// Absolute tolerance on the gradient-deviation inequalities.
inline constexpr double kLemmaTolerance = 1e-9;

/// Mean one-hot loss over the dataset.
double full_loss(const PromptParams& v, std::span<const ImageSample> data, const ModelParts& parts);

/// Mean one-hot gradient over the dataset.
PromptParams full_gradient(const PromptParams& v, std::span<const ImageSample> data,
                           const ModelParts& parts);

/// Throws std::domain_error("zero one-hot variance; kappa undefined") when sigma2 == 0.
VarianceEstimate estimate_variances(const PromptParams& v, std::span<const ImageSample> data,
                                    const ModelParts& parts);

/// LHS = (K-1)/K * sigma^2 + 1/K * mean |grad l(y_LS) - grad F|^2 with uniform
/// smoothing; RHS = (1 - theta/K + theta*kappa/K) * sigma^2.
InequalityCheck lemma2_check(const PromptParams& v, std::span<const ImageSample> data,
                             const ModelParts& parts, double theta, int K);

/// LHS = mean |grad l(y_LS) - grad F|^2; RHS = (1 - theta + theta*kappa) * sigma^2.
InequalityCheck lemma3_check(const PromptParams& v, std::span<const ImageSample> data,
                             const ModelParts& parts, double theta);

/// 2 F0 / (eta T) + (1 - theta/K + theta*kappa/K) * sigma^2
double atlas_bound(const BoundInputs& in);
/// 2 F0 / (eta T) + (1 - theta + theta*kappa) * sigma^2
double ls_bound(const BoundInputs& in);

using GradientFn = std::function<Vector(std::span<const double>)>;

/// 2 * max_k |g(u_k) - g(u_k + d_k)| / |d_k| over num_probes random pairs with
/// |d_k| = radius and u_0 = point, u_k drawn within radius of point.
double estimate_beta(const GradientFn& gradient, std::span<const double> point,
                     std::size_t num_probes, double radius, std::uint64_t seed);

/// Smoothness of the empirical one-hot loss around v.
double estimate_beta(const PromptParams& v, std::span<const ImageSample> data,
                     const ModelParts& parts, std::size_t num_probes, double radius,
                     std::uint64_t seed);

/// Compares mean(full_grad_sq_norms[0..T)) with atlas_bound * (1 + 5%).
/// Throws std::invalid_argument if the run's eta differs from inputs.eta or
/// fewer than T norms were recorded.
BoundReport theorem1_trajectory_check(const TrainReport& report,
                                      std::span<const double> full_grad_sq_norms,
                                      const BoundInputs& inputs);

struct DiagnosisConfig {
  double theta = 0.1;
  int K = 2;
  std::size_t T = 500;
  std::size_t batch_size = 1;
  std::size_t beta_probes = 16;
  double beta_radius = 0.05;
  /// Variance estimates are taken at v_0 and every this many steps.
  std::size_t checkpoint_interval = 50;
  std::uint64_t seed = 0;
};

struct Diagnosis {
  BoundReport report;
  VarianceEstimate at_init;
  std::vector<std::size_t> checkpoint_steps;
  std::vector<VarianceEstimate> checkpoints;
  std::vector<double> full_grad_sq_norms;
  TrainReport training;
};

/// End-to-end check: estimate beta at v0, train the alternating uniform-LS
/// mode with eta = 1/beta_hat for T steps while recording |grad F(v_t)|^2,
/// take sigma^2 and kappa as maxima over checkpoints, and evaluate both
/// inequalities at v0 and both bounds.
Diagnosis run_diagnosis(std::span<const ImageSample> data, const ModelParts& parts,
                        const PromptParams& init, const DiagnosisConfig& cfg);

/// One header row and one value row.
void write_bound_report_csv(std::ostream& out, const BoundReport& report);
/// Human-readable summary block.
void write_bound_report_text(std::ostream& out, const Diagnosis& diagnosis);

}  // namespace atlas

#endif  // ATLAS_DIAGNOSTICS_HPP
