// SPDX-License-Identifier: Apache-2.0

#include "atlas/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "atlas/csv.hpp"
#include "atlas/parallel.hpp"
#include "atlas/random.hpp"

namespace atlas {

bool TrainMode::needs_csl() const noexcept {
  return variant != TrainVariant::OneHot &&
         (source == LabelSource::CSL || source == LabelSource::Mix);
}

bool TrainMode::needs_isl() const noexcept {
  return variant != TrainVariant::OneHot &&
         (source == LabelSource::ISL || source == LabelSource::Mix);
}

std::string TrainMode::name() const {
  if (variant == TrainVariant::OneHot) return "onehot";
  std::string base;
  switch (source) {
    case LabelSource::UniformLS: base = variant == TrainVariant::Alternating ? "" : "ls"; break;
    case LabelSource::CSL: base = "csl"; break;
    case LabelSource::ISL: base = "isl"; break;
    case LabelSource::Mix: base = "mix"; break;
  }
  switch (variant) {
    case TrainVariant::SoftOnly: return base;
    case TrainVariant::JointWithY: return base + "+y";
    case TrainVariant::Alternating: return base.empty() ? "atlas" : "atlas-" + base;
    case TrainVariant::OneHot: break;
  }
  return "onehot";
}

TrainMode TrainMode::parse(const std::string& name, double mix_weight) {
  static const std::vector<std::pair<std::string, TrainMode>> kModes = {
      {"onehot", {TrainVariant::OneHot, LabelSource::UniformLS}},
      {"ls", {TrainVariant::SoftOnly, LabelSource::UniformLS}},
      {"ls+y", {TrainVariant::JointWithY, LabelSource::UniformLS}},
      {"atlas", {TrainVariant::Alternating, LabelSource::UniformLS}},
      {"csl", {TrainVariant::SoftOnly, LabelSource::CSL}},
      {"csl+y", {TrainVariant::JointWithY, LabelSource::CSL}},
      {"atlas-csl", {TrainVariant::Alternating, LabelSource::CSL}},
      {"isl", {TrainVariant::SoftOnly, LabelSource::ISL}},
      {"isl+y", {TrainVariant::JointWithY, LabelSource::ISL}},
      {"atlas-isl", {TrainVariant::Alternating, LabelSource::ISL}},
      {"mix", {TrainVariant::SoftOnly, LabelSource::Mix}},
      {"mix+y", {TrainVariant::JointWithY, LabelSource::Mix}},
      {"atlas-mix", {TrainVariant::Alternating, LabelSource::Mix}},
  };
  for (const auto& [key, mode] : kModes) {
    if (key == name) {
      TrainMode out = mode;
      out.mix_weight = mix_weight;
      return out;
    }
  }
  throw std::invalid_argument("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be >= 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be ≥ 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
  if (!(tau_c > 0.0)) throw std::invalid_argument("tau_c must be > 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  MixWeight check(mode.mix_weight);
  (void)check;
}

std::vector<std::vector<std::size_t>> batch_iterator(std::size_t n, std::size_t batch_size,
                                                     int epoch, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("batch_iterator: no samples");
  if (batch_size == 0) throw std::invalid_argument("batch_iterator: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)), rng_stream::kShuffle);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

namespace {

ProbabilityVector soft_label(const ImageSample& sample, const TrainMode& mode,
                             const LabelTables& tables, const TrainConfig& cfg) {
  const auto require_csl = [&]() -> const CslTable& {
    if (!tables.csl) throw std::invalid_argument("mode " + mode.name() + " requires a CSL table");
    return *tables.csl;
  };
  const auto require_isl = [&]() -> const IslTable& {
    if (!tables.isl) throw std::invalid_argument("mode " + mode.name() + " requires an ISL table");
    return *tables.isl;
  };
  switch (mode.source) {
    case LabelSource::CSL:
      return require_csl().row(sample.label.class_index());
    case LabelSource::ISL:
      return require_isl().at(sample.id);
    case LabelSource::Mix:
      return mix_csl_isl(require_csl().row(sample.label.class_index()),
                         require_isl().at(sample.id), MixWeight(mode.mix_weight));
    case LabelSource::UniformLS:
      break;
  }
  return vanilla_smooth(sample.label, SmoothingConfig::uniform(sample.label.num_classes(), cfg.theta));
}

void add_into(PromptParams& acc, const PromptParams& g) { axpy(1.0, g.flat(), acc.flat()); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

ProbabilityVector supervision_for(const ImageSample& sample, int xi, const TrainMode& mode,
                                  const LabelTables& tables, const TrainConfig& cfg) {
  if (xi == 1 || mode.variant == TrainVariant::OneHot) return sample.label.distribution();
  return select_label(xi, sample.label, soft_label(sample, mode, tables, cfg));
}

int phase_for_mode(int epoch, const TrainMode& mode, int K) {
  switch (mode.variant) {
    case TrainVariant::OneHot: return 1;
    case TrainVariant::SoftOnly:
    case TrainVariant::JointWithY: return 0;
    case TrainVariant::Alternating: break;
  }
  return schedule_phase(epoch, K);
}

SampleEvaluation training_objective(const PromptParams& v, const ImageSample& sample, int xi,
                                    const ModelParts& parts, const LabelTables& tables,
                                    const TrainConfig& cfg) {
  const auto target = supervision_for(sample, xi, cfg.mode, tables, cfg);
  auto eval = evaluate_sample(v, sample, target, parts);
  if (cfg.mode.variant == TrainVariant::JointWithY) {
    const auto hard = evaluate_sample(v, sample, sample.label.distribution(), parts);
    eval.loss += hard.loss;
    add_into(eval.grad, hard.grad);
  }
  return eval;
}

TrainReport run_training(std::span<const ImageSample> data, const ModelParts& parts,
                         const PromptParams& init, const LabelTables& tables,
                         const TrainConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("run_training: empty dataset");
  check_prompt_shape(init, parts.encoder);
  if (cfg.mode.needs_csl() && !tables.csl) {
    throw std::invalid_argument("mode " + cfg.mode.name() + " requires a CSL table");
  }
  if (cfg.mode.needs_isl() && !tables.isl) {
    throw std::invalid_argument("mode " + cfg.mode.name() + " requires an ISL table");
  }

  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.eta = cfg.eta;
  PromptParams v = init;
  std::size_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int xi = phase_for_mode(epoch, cfg.mode, cfg.K);
    Vector sample_losses;
    sample_losses.reserve(data.size());
    Vector batch_sq_norms;

    const auto batches = batch_iterator(data.size(), cfg.batch_size, epoch, cfg.seed);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      if (observer) observer(step, v);

      std::vector<SampleEvaluation> evals(batch.size());
      parallel_for(batch.size(), [&](std::size_t i) {
        evals[i] = training_objective(v, data[batch[i]], xi, parts, tables, cfg);
      });

      // Mean over the batch, reduced in batch order.
      Vector grad(v.size());
      for (std::size_t k = 0; k < grad.size(); ++k) {
        CompensatedSum acc;
        for (const auto& e : evals) acc.add(e.grad.flat()[k]);
        grad[k] = acc.value() / static_cast<double>(batch.size());
      }
      for (const auto& e : evals) sample_losses.push_back(e.loss);

      if (!all_finite(grad) || !all_finite(std::span<const double>(sample_losses).last(batch.size()))) {
        throw std::runtime_error("non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                 ", iteration " + std::to_string(b));
      }
      batch_sq_norms.push_back(squared_norm(grad));
      axpy(-cfg.eta, grad, v.flat());
      if (!all_finite(v.flat())) {
        throw std::runtime_error("prompt diverged at epoch " + std::to_string(epoch) +
                                 ", iteration " + std::to_string(b));
      }
      ++step;
    }

    std::vector<char> correct(data.size(), 0);
    parallel_for(data.size(), [&](std::size_t i) {
      correct[i] = forward_probs(v, data[i], parts).argmax() == data[i].label.class_index();
    });
    const auto hits = static_cast<double>(std::count(correct.begin(), correct.end(), 1));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.xi = xi;
    rec.mean_loss = deterministic_sum(sample_losses) / static_cast<double>(sample_losses.size());
    rec.mean_sq_grad_norm =
        deterministic_sum(batch_sq_norms) / static_cast<double>(batch_sq_norms.size());
    rec.train_acc = hits / static_cast<double>(data.size());
    report.epochs.push_back(rec);
  }

  report.final_prompt = std::move(v);
  report.total_steps = step;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

void write_train_report_csv(std::ostream& out, const TrainReport& report) {
  out << "epoch,xi,mean_loss,mean_sq_grad_norm,train_acc\n";
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << r.xi << ',' << csv::format_double(r.mean_loss) << ','
        << csv::format_double(r.mean_sq_grad_norm) << ',' << csv::format_double(r.train_acc)
        << '\n';
  }
}

std::vector<EpochRecord> read_train_report_csv(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    ++line_number;
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    if (line_number == 1) {
      if (fields != std::vector<std::string>{"epoch", "xi", "mean_loss", "mean_sq_grad_norm",
                                             "train_acc"}) {
        throw csv::ParseError(line_number, "unexpected train report header");
      }
      continue;
    }
    if (fields.size() != 5) throw csv::ParseError(line_number, "expected 5 fields");
    EpochRecord r;
    r.epoch = static_cast<int>(csv::parse_int(fields[0], line_number));
    r.xi = static_cast<int>(csv::parse_int(fields[1], line_number));
    r.mean_loss = csv::parse_double(fields[2], line_number);
    r.mean_sq_grad_norm = csv::parse_double(fields[3], line_number);
    r.train_acc = csv::parse_double(fields[4], line_number);
    out.push_back(r);
  }
  return out;
}

}  // namespace atlas
