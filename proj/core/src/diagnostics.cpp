// SPDX-License-Identifier: Apache-2.0

#include "atlas/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "atlas/csv.hpp"
#include "atlas/parallel.hpp"
#include "atlas/random.hpp"

namespace atlas {

namespace {

// Per-sample one-hot gradients, computed concurrently, kept in sample order.
std::vector<PromptParams> per_sample_gradients(const PromptParams& v,
                                               std::span<const ImageSample> data,
                                               const ModelParts& parts,
                                               const std::function<ProbabilityVector(const ImageSample&)>& target) {
  std::vector<PromptParams> grads(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    grads[i] = grad_prompt(v, data[i], target(data[i]), parts);
  });
  return grads;
}

PromptParams mean_of(const std::vector<PromptParams>& grads) {
  PromptParams out(grads.front().length(), grads.front().dim());
  auto flat = out.flat();
  for (std::size_t k = 0; k < flat.size(); ++k) {
    CompensatedSum acc;
    for (const auto& g : grads) acc.add(g.flat()[k]);
    flat[k] = acc.value() / static_cast<double>(grads.size());
  }
  return out;
}

double mean_sq_deviation(const std::vector<PromptParams>& grads, const PromptParams& center) {
  Vector devs(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    CompensatedSum acc;
    for (std::size_t k = 0; k < center.size(); ++k) {
      const double d = grads[i].flat()[k] - center.flat()[k];
      acc.add(d * d);
    }
    devs[i] = acc.value();
  }
  return deterministic_sum(devs) / static_cast<double>(grads.size());
}

ProbabilityVector one_hot_target(const ImageSample& x) { return x.label.distribution(); }

void require_data(std::span<const ImageSample> data, std::size_t min_size, const char* op) {
  if (data.size() < min_size) {
    throw std::invalid_argument(std::string(op) + ": need at least " + std::to_string(min_size) +
                                " samples");
  }
}

// Mean |grad l(y_LS) - grad F|^2 under uniform smoothing with theta.
double smoothed_deviation(const PromptParams& v, std::span<const ImageSample> data,
                          const ModelParts& parts, const PromptParams& full, double theta) {
  const auto grads = per_sample_gradients(v, data, parts, [&](const ImageSample& x) {
    return vanilla_smooth(x.label, SmoothingConfig::uniform(x.label.num_classes(), theta));
  });
  return mean_sq_deviation(grads, full);
}

}  // namespace

double full_loss(const PromptParams& v, std::span<const ImageSample> data, const ModelParts& parts) {
  require_data(data, 1, "full_loss");
  Vector losses(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    losses[i] = loss(v, data[i], data[i].label.distribution(), parts);
  });
  return deterministic_sum(losses) / static_cast<double>(data.size());
}

PromptParams full_gradient(const PromptParams& v, std::span<const ImageSample> data,
                           const ModelParts& parts) {
  require_data(data, 1, "full_gradient");
  return mean_of(per_sample_gradients(v, data, parts, one_hot_target));
}

VarianceEstimate estimate_variances(const PromptParams& v, std::span<const ImageSample> data,
                                    const ModelParts& parts) {
  require_data(data, 2, "estimate_variances");
  const auto hard = per_sample_gradients(v, data, parts, one_hot_target);
  const auto full = mean_of(hard);
  const auto uniform = per_sample_gradients(v, data, parts, [](const ImageSample& x) {
    return ProbabilityVector::uniform(x.label.num_classes());
  });
  VarianceEstimate est;
  est.sigma2 = mean_sq_deviation(hard, full);
  est.sigma_hat2 = mean_sq_deviation(uniform, full);
  if (!(est.sigma2 > 0.0)) throw std::domain_error("zero one-hot variance; kappa undefined");
  est.kappa = est.sigma_hat2 / est.sigma2;
  if (!std::isfinite(est.kappa)) throw std::domain_error("non-finite kappa");
  return est;
}

InequalityCheck lemma2_check(const PromptParams& v, std::span<const ImageSample> data,
                             const ModelParts& parts, double theta, int K) {
  if (K < 1) throw std::invalid_argument("K must be ≥ 1");
  const auto est = estimate_variances(v, data, parts);
  const auto full = full_gradient(v, data, parts);
  const double soft_dev = smoothed_deviation(v, data, parts, full, theta);
  const double k = static_cast<double>(K);
  InequalityCheck out;
  out.lhs = (k - 1.0) / k * est.sigma2 + soft_dev / k;
  out.rhs = (1.0 - theta / k + theta * est.kappa / k) * est.sigma2;
  out.pass = out.lhs <= out.rhs + kLemmaTolerance;
  return out;
}

InequalityCheck lemma3_check(const PromptParams& v, std::span<const ImageSample> data,
                             const ModelParts& parts, double theta) {
  const auto est = estimate_variances(v, data, parts);
  const auto full = full_gradient(v, data, parts);
  InequalityCheck out;
  out.lhs = smoothed_deviation(v, data, parts, full, theta);
  out.rhs = (1.0 - theta + theta * est.kappa) * est.sigma2;
  out.pass = out.lhs <= out.rhs + kLemmaTolerance;
  return out;
}

namespace {

double optimization_term(const BoundInputs& in) {
  if (!(in.eta > 0.0) || in.T == 0) {
    throw std::invalid_argument("bound requires eta > 0 and T > 0");
  }
  return 2.0 * in.F0 / (in.eta * static_cast<double>(in.T));
}

}  // namespace

double atlas_bound(const BoundInputs& in) {
  const double k = static_cast<double>(in.K);
  return optimization_term(in) + (1.0 - in.theta / k + in.theta * in.kappa / k) * in.sigma2;
}

double ls_bound(const BoundInputs& in) {
  return optimization_term(in) + (1.0 - in.theta + in.theta * in.kappa) * in.sigma2;
}

double estimate_beta(const GradientFn& gradient, std::span<const double> point,
                     std::size_t num_probes, double radius, std::uint64_t seed) {
  if (num_probes < 10) throw std::invalid_argument("estimate_beta: need at least 10 probes");
  if (!(radius > 0.0)) throw std::invalid_argument("estimate_beta: radius must be positive");
  auto rng = make_rng(seed, rng_stream::kBetaProbe);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto random_direction = [&] {
    Vector d;
    double n = 0.0;
    do {
      d = gaussian_vector(rng, point.size());
      n = norm(d);
    } while (!(n > 0.0));
    for (double& x : d) x /= n;
    return d;
  };

  double best = 0.0;
  for (std::size_t k = 0; k < num_probes; ++k) {
    Vector base(point.begin(), point.end());
    if (k > 0) axpy(radius * unit(rng), random_direction(), base);
    Vector shifted = base;
    const Vector step = random_direction();
    axpy(radius, step, shifted);
    Vector g0 = gradient(base);
    const Vector g1 = gradient(shifted);
    axpy(-1.0, g1, g0);
    best = std::max(best, norm(g0) / radius);
  }
  // A flat region would give zero; keep the estimate strictly positive.
  return std::max(2.0 * best, 1e-12);
}

double estimate_beta(const PromptParams& v, std::span<const ImageSample> data,
                     const ModelParts& parts, std::size_t num_probes, double radius,
                     std::uint64_t seed) {
  const GradientFn fn = [&](std::span<const double> x) {
    const PromptParams p(v.length(), v.dim(), Vector(x.begin(), x.end()));
    const auto g = full_gradient(p, data, parts);
    return Vector(g.flat().begin(), g.flat().end());
  };
  return estimate_beta(fn, v.flat(), num_probes, radius, seed);
}

BoundReport theorem1_trajectory_check(const TrainReport& report,
                                      std::span<const double> full_grad_sq_norms,
                                      const BoundInputs& inputs) {
  if (std::abs(report.eta - inputs.eta) > 1e-12 * std::max(1.0, std::abs(inputs.eta))) {
    throw std::invalid_argument("theorem1_trajectory_check: training used eta=" +
                                csv::format_double(report.eta) + " but bound assumes eta=" +
                                csv::format_double(inputs.eta));
  }
  if (inputs.T == 0 || full_grad_sq_norms.size() < inputs.T) {
    throw std::invalid_argument("theorem1_trajectory_check: need " + std::to_string(inputs.T) +
                                " recorded gradient norms, have " +
                                std::to_string(full_grad_sq_norms.size()));
  }
  BoundReport out;
  out.inputs = inputs;
  out.measured_avg_sq_grad =
      deterministic_sum(full_grad_sq_norms.first(inputs.T)) / static_cast<double>(inputs.T);
  out.atlas_bound = atlas_bound(inputs);
  out.ls_bound = ls_bound(inputs);
  out.theorem1_pass = out.measured_avg_sq_grad <= out.atlas_bound * (1.0 + kTheorem1Slack);
  out.atlas_tighter = out.atlas_bound < out.ls_bound;
  return out;
}

Diagnosis run_diagnosis(std::span<const ImageSample> data, const ModelParts& parts,
                        const PromptParams& init, const DiagnosisConfig& cfg) {
  require_data(data, 2, "run_diagnosis");
  if (cfg.T == 0) throw std::invalid_argument("run_diagnosis: T must be positive");
  if (cfg.checkpoint_interval == 0) {
    throw std::invalid_argument("run_diagnosis: checkpoint interval must be positive");
  }

  Diagnosis out;
  out.at_init = estimate_variances(init, data, parts);
  const double beta_hat =
      estimate_beta(init, data, parts, cfg.beta_probes, cfg.beta_radius, cfg.seed);

  TrainConfig train;
  train.eta = 1.0 / beta_hat;
  train.batch_size = cfg.batch_size;
  train.K = cfg.K;
  train.theta = cfg.theta;
  train.seed = cfg.seed;
  train.mode = TrainMode{TrainVariant::Alternating, LabelSource::UniformLS};
  const std::size_t steps_per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  train.epochs = static_cast<int>((cfg.T + steps_per_epoch - 1) / steps_per_epoch);

  out.checkpoint_steps.push_back(0);
  out.checkpoints.push_back(out.at_init);
  const StepObserver observer = [&](std::size_t step, const PromptParams& v) {
    if (step >= cfg.T) return;
    out.full_grad_sq_norms.push_back(full_gradient(v, data, parts).squared_norm());
    if (step > 0 && step % cfg.checkpoint_interval == 0) {
      out.checkpoint_steps.push_back(step);
      out.checkpoints.push_back(estimate_variances(v, data, parts));
    }
  };
  out.training = run_training(data, parts, init, LabelTables{}, train, observer);

  BoundInputs inputs;
  inputs.F0 = full_loss(init, data, parts);
  inputs.eta = train.eta;
  inputs.T = cfg.T;
  inputs.theta = cfg.theta;
  inputs.K = cfg.K;
  inputs.beta_hat = beta_hat;
  for (const auto& est : out.checkpoints) {
    inputs.kappa = std::max(inputs.kappa, est.kappa);
    inputs.sigma2 = std::max(inputs.sigma2, est.sigma2);
  }

  out.report = theorem1_trajectory_check(out.training, out.full_grad_sq_norms, inputs);
  const auto l2 = lemma2_check(init, data, parts, cfg.theta, cfg.K);
  const auto l3 = lemma3_check(init, data, parts, cfg.theta);
  out.report.lemma2_lhs = l2.lhs;
  out.report.lemma2_rhs = l2.rhs;
  out.report.lemma2_pass = l2.pass;
  out.report.lemma3_lhs = l3.lhs;
  out.report.lemma3_rhs = l3.rhs;
  out.report.lemma3_pass = l3.pass;
  return out;
}

void write_bound_report_csv(std::ostream& out, const BoundReport& r) {
  using csv::format_double;
  out << "atlas_bound,ls_bound,measured_avg_sq_grad,theorem1_pass,atlas_tighter,"
         "lemma2_lhs,lemma2_rhs,lemma2_pass,lemma3_lhs,lemma3_rhs,lemma3_pass,"
         "F0,eta,T,theta,K,kappa,sigma2,beta_hat\n";
  out << format_double(r.atlas_bound) << ',' << format_double(r.ls_bound) << ','
      << format_double(r.measured_avg_sq_grad) << ',' << (r.theorem1_pass ? "true" : "false")
      << ',' << (r.atlas_tighter ? "true" : "false") << ',' << format_double(r.lemma2_lhs) << ','
      << format_double(r.lemma2_rhs) << ',' << (r.lemma2_pass ? "true" : "false") << ','
      << format_double(r.lemma3_lhs) << ',' << format_double(r.lemma3_rhs) << ','
      << (r.lemma3_pass ? "true" : "false") << ',' << format_double(r.inputs.F0) << ','
      << format_double(r.inputs.eta) << ',' << r.inputs.T << ',' << format_double(r.inputs.theta)
      << ',' << r.inputs.K << ',' << format_double(r.inputs.kappa) << ','
      << format_double(r.inputs.sigma2) << ',' << format_double(r.inputs.beta_hat) << '\n';
}

void write_bound_report_text(std::ostream& out, const Diagnosis& d) {
  const auto& r = d.report;
  const auto flag = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  out << "Convergence diagnostics\n"
      << "  F(v0)            " << csv::format_double(r.inputs.F0) << '\n'
      << "  beta_hat         " << csv::format_double(r.inputs.beta_hat) << "  (eta = 1/beta_hat = "
      << csv::format_double(r.inputs.eta) << ")\n"
      << "  T                " << r.inputs.T << '\n'
      << "  theta, K         " << csv::format_double(r.inputs.theta) << ", " << r.inputs.K << '\n'
      << "  sigma2(v0)       " << csv::format_double(d.at_init.sigma2) << '\n'
      << "  kappa(v0)        " << csv::format_double(d.at_init.kappa) << '\n'
      << "  sigma2 (max)     " << csv::format_double(r.inputs.sigma2) << "  over "
      << d.checkpoints.size() << " checkpoints\n"
      << "  kappa (max)      " << csv::format_double(r.inputs.kappa) << '\n'
      << "  alternating dev. " << csv::format_double(r.lemma2_lhs)
      << " <= " << csv::format_double(r.lemma2_rhs) << "  " << flag(r.lemma2_pass) << '\n'
      << "  smoothed dev.    " << csv::format_double(r.lemma3_lhs)
      << " <= " << csv::format_double(r.lemma3_rhs) << "  " << flag(r.lemma3_pass) << '\n'
      << "  avg |grad F|^2   " << csv::format_double(r.measured_avg_sq_grad)
      << " <= 1.05 * " << csv::format_double(r.atlas_bound) << "  " << flag(r.theorem1_pass)
      << '\n'
      << "  LS bound         " << csv::format_double(r.ls_bound)
      << (r.atlas_tighter ? "  (alternating bound is tighter)\n"
                          : "  (alternating bound is not tighter)\n");
}

}  // namespace atlas
