// SPDX-License-Identifier: Apache-2.0

#include "atlas/harness.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "atlas/csv.hpp"
#include "atlas/parallel.hpp"
#include "atlas/random.hpp"
#include "atlas/svg_plot.hpp"

namespace atlas {

void SyntheticTaskConfig::validate() const {
  if (base_classes < 2) throw std::invalid_argument("need at least 2 base classes");
  if (new_classes < 1) throw std::invalid_argument("need at least 1 new class");
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (test_shots < 1) throw std::invalid_argument("test shots must be >= 1");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (!(domain_shift >= 0.0)) throw std::invalid_argument("domain_shift must be >= 0");
  if (!(token_correlation >= 0.0 && token_correlation <= 1.0)) {
    throw std::invalid_argument("token_correlation must lie in [0, 1]");
  }
  if (dims.prompt_length == 0 || dims.prompt_dim == 0 || dims.token_dim == 0 ||
      dims.embed_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
}

ModelParts Task::base_parts(const ModelConfig& model) const {
  return ModelParts{encoder, vocab.slice(0, base_classes), model};
}

ModelParts Task::all_parts(const ModelConfig& model) const {
  return ModelParts{encoder, vocab, model};
}

std::vector<std::size_t> Task::base_subset() const {
  std::vector<std::size_t> out(base_classes);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

std::vector<std::size_t> Task::new_subset() const {
  std::vector<std::size_t> out(num_classes() - base_classes);
  std::iota(out.begin(), out.end(), base_classes);
  return out;
}

Task generate_task(const SyntheticTaskConfig& cfg) {
  cfg.validate();
  const ModelDims& dims = cfg.dims;
  const std::size_t total = cfg.base_classes + cfg.new_classes;
  auto encoder = FrozenEncoder::random(dims, cfg.seed);
  auto init = PromptParams::random(dims.prompt_length, dims.prompt_dim, cfg.seed);
  auto rng = make_rng(cfg.seed, rng_stream::kTask);

  // Each class has a latent concept z_c. Its token is a noisy copy of z_c and
  // its image prototype is the token-column image of z_c plus a shared offset.
  const double rho = cfg.token_correlation;
  const double rest = std::sqrt(1.0 - rho * rho);
  const std::size_t p = dims.prompt_size();
  std::vector<Vector> tokens;
  std::vector<Vector> prototypes;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < total; ++c) {
    const Vector z = gaussian_vector(rng, dims.token_dim);
    const Vector eps = gaussian_vector(rng, dims.token_dim);
    Vector token(dims.token_dim);
    for (std::size_t k = 0; k < token.size(); ++k) token[k] = rho * z[k] + rest * eps[k];
    Vector proto(dims.embed_dim);
    for (std::size_t r = 0; r < dims.embed_dim; ++r) {
      proto[r] = dot(encoder.weight().row(r).subspan(p), z);
    }
    tokens.push_back(std::move(token));
    prototypes.push_back(std::move(proto));
    names.push_back((c < cfg.base_classes ? "base_" : "new_") + std::to_string(c));
  }

  double mean_norm = 0.0;
  for (const auto& proto : prototypes) mean_norm += norm(proto);
  mean_norm /= static_cast<double>(total);
  Vector shift = gaussian_vector(rng, dims.embed_dim);
  const double shift_norm = norm(shift);
  for (double& s : shift) s *= cfg.domain_shift * mean_norm / shift_norm;
  for (auto& proto : prototypes) axpy(1.0, shift, proto);

  const auto draw_image = [&](std::size_t c) {
    Vector img = prototypes[c];
    if (cfg.noise_std > 0.0) axpy(1.0, gaussian_vector(rng, dims.embed_dim, cfg.noise_std), img);
    if (!(norm(img) > 0.0)) img[0] = 1e-12;
    return img;
  };

  std::vector<ImageSample> train;
  for (std::size_t c = 0; c < cfg.base_classes; ++c) {
    for (std::size_t k = 0; k < cfg.shots; ++k) {
      train.push_back({"train_c" + std::to_string(c) + "_" + std::to_string(k), draw_image(c),
                       OneHotLabel(c, cfg.base_classes)});
    }
  }
  std::vector<ImageSample> test;
  for (std::size_t c = 0; c < total; ++c) {
    for (std::size_t k = 0; k < cfg.test_shots; ++k) {
      test.push_back({"test_c" + std::to_string(c) + "_" + std::to_string(k), draw_image(c),
                      OneHotLabel(c, total)});
    }
  }

  return Task{std::move(train), std::move(test), ClassVocabulary(std::move(tokens), std::move(names)),
              std::move(encoder), std::move(init), cfg.base_classes};
}

double evaluate(const PromptParams& v, std::span<const ImageSample> samples,
                const ModelParts& parts, std::span<const std::size_t> subset) {
  if (subset.empty()) throw std::invalid_argument("evaluate: empty class subset");
  std::vector<std::size_t> classes(subset.begin(), subset.end());
  std::sort(classes.begin(), classes.end());
  for (std::size_t c : classes) {
    if (c >= parts.num_classes()) throw std::invalid_argument("evaluate: class outside vocabulary");
  }
  std::vector<const ImageSample*> chosen;
  for (const auto& s : samples) {
    if (std::binary_search(classes.begin(), classes.end(), s.label.class_index())) {
      chosen.push_back(&s);
    }
  }
  if (chosen.empty()) throw std::invalid_argument("evaluate: no sample belongs to the class subset");

  std::vector<char> correct(chosen.size(), 0);
  parallel_for(chosen.size(), [&](std::size_t i) {
    const Vector logits = class_logits(v, *chosen[i], parts);
    std::size_t best = classes.front();
    for (std::size_t c : classes) {
      if (logits[c] > logits[best]) best = c;
    }
    correct[i] = best == chosen[i]->label.class_index();
  });
  const auto hits = static_cast<double>(std::count(correct.begin(), correct.end(), 1));
  return hits / static_cast<double>(chosen.size());
}

double harmonic_mean(double base_acc, double new_acc) {
  if (base_acc + new_acc <= 0.0) return 0.0;
  return 2.0 * base_acc * new_acc / (base_acc + new_acc);
}

EvalResult evaluate_base_new(const PromptParams& v, const Task& task, const ModelConfig& model) {
  const auto parts = task.all_parts(model);
  EvalResult r;
  r.base_acc = evaluate(v, task.test, parts, task.base_subset());
  r.new_acc = evaluate(v, task.test, parts, task.new_subset());
  r.harmonic_mean = harmonic_mean(r.base_acc, r.new_acc);
  return r;
}

LabelTables build_tables(const Task& task, const TrainConfig& cfg, const ModelConfig& model,
                         bool all) {
  const auto parts = task.base_parts(model);
  LabelTables tables;
  if (all || cfg.mode.needs_csl()) {
    tables.csl = build_csl(encode_classes(task.init_prompt, parts.encoder, parts.vocab), cfg.tau_c);
  }
  if (all || cfg.mode.needs_isl()) {
    std::vector<ProbabilityVector> probs(task.train.size());
    parallel_for(task.train.size(), [&](std::size_t i) {
      probs[i] = zero_shot_probs(task.train[i], task.init_prompt, parts);
    });
    std::map<std::string, ProbabilityVector> zero_shot;
    std::map<std::string, OneHotLabel> labels;
    for (std::size_t i = 0; i < task.train.size(); ++i) {
      if (!zero_shot.emplace(task.train[i].id, probs[i]).second) {
        throw std::invalid_argument("duplicate sample id " + task.train[i].id);
      }
      labels.emplace(task.train[i].id, task.train[i].label);
    }
    tables.isl = build_isl(zero_shot, labels, cfg.alpha, cfg.force_delta);
  }
  return tables;
}

TrainedRun train_and_evaluate(const Task& task, const TrainConfig& cfg, const ModelConfig& model) {
  const auto tables = build_tables(task, cfg, model);
  TrainedRun run;
  run.report = run_training(task.train, task.base_parts(model), task.init_prompt, tables, cfg);
  run.eval = evaluate_base_new(run.report.final_prompt, task, model);
  return run;
}

void SweepSpec::validate() const {
  static const std::vector<std::string> kParams = {"theta", "tau_c", "alpha", "K", "w"};
  if (std::find(kParams.begin(), kParams.end(), parameter) == kParams.end()) {
    throw std::invalid_argument("unknown sweep parameter '" + parameter +
                                "' (expected theta, tau_c, alpha, K or w)");
  }
  if (values.empty()) throw std::invalid_argument("sweep grid is empty");
  if (repetitions < 1) throw std::invalid_argument("sweep needs at least one repetition");
}

namespace {

TrainConfig with_parameter(TrainConfig cfg, const std::string& parameter, double value) {
  if (parameter == "theta") {
    cfg.theta = value;
  } else if (parameter == "tau_c") {
    cfg.tau_c = value;
  } else if (parameter == "alpha") {
    cfg.alpha = value;
  } else if (parameter == "K") {
    if (value != std::floor(value)) throw std::invalid_argument("K must be an integer");
    cfg.K = static_cast<int>(value);
  } else if (parameter == "w") {
    cfg.mode.mix_weight = value;
  }
  return cfg;
}

}  // namespace

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const TrainConfig& base,
                                const ModelConfig& model, const Task& task) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (double value : spec.values) {
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      try {
        TrainConfig cfg = with_parameter(base, spec.parameter, value);
        cfg.seed = base.seed + r;
        rows.push_back({spec.parameter, value, cfg.seed, train_and_evaluate(task, cfg, model).eval});
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(spec.parameter + "=" + csv::format_double(value) + ": " +
                                    e.what());
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(spec.parameter + "=" + csv::format_double(value) + ": " +
                                 e.what());
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "parameter,value,seed,base_acc,new_acc,harmonic_mean\n";
  for (const auto& r : rows) {
    out << r.parameter << ',' << csv::format_double(r.value) << ',' << r.seed << ','
        << csv::format_double(r.eval.base_acc) << ',' << csv::format_double(r.eval.new_acc) << ','
        << csv::format_double(r.eval.harmonic_mean) << '\n';
  }
}

std::vector<SweepRow> read_sweep_csv(std::istream& in) {
  std::vector<SweepRow> rows;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (line_number == 1) {
      if (f.empty() || f[0] != "parameter") throw csv::ParseError(1, "not a sweep table");
      continue;
    }
    if (f.size() != 6) throw csv::ParseError(line_number, "expected 6 fields");
    SweepRow r;
    r.parameter = f[0];
    r.value = csv::parse_double(f[1], line_number);
    r.seed = static_cast<std::uint64_t>(csv::parse_int(f[2], line_number));
    r.eval.base_acc = csv::parse_double(f[3], line_number);
    r.eval.new_acc = csv::parse_double(f[4], line_number);
    r.eval.harmonic_mean = csv::parse_double(f[5], line_number);
    rows.push_back(r);
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_sweep_svg(std::ostream& out, const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("write_sweep_svg: no rows");
  std::map<double, std::vector<EvalResult>> by_value;
  for (const auto& r : rows) by_value[r.value].push_back(r.eval);
  std::vector<double> x;
  PlotSeries base{"base", {}}, novel{"new", {}}, h{"H", {}};
  for (const auto& [value, evals] : by_value) {
    x.push_back(value);
    std::vector<double> b, n, hm;
    for (const auto& e : evals) {
      b.push_back(e.base_acc);
      n.push_back(e.new_acc);
      hm.push_back(e.harmonic_mean);
    }
    base.y.push_back(median(b));
    novel.y.push_back(median(n));
    h.y.push_back(median(hm));
  }
  const std::string& param = rows.front().parameter;
  write_line_plot_svg(out, "Accuracy vs " + param, param, x, {base, novel, h});
}

std::vector<TrainMode> ablation_modes() {
  return {
      TrainMode::parse("onehot"), TrainMode::parse("ls"),        TrainMode::parse("ls+y"),
      TrainMode::parse("atlas"),  TrainMode::parse("csl"),       TrainMode::parse("csl+y"),
      TrainMode::parse("atlas-csl"), TrainMode::parse("isl"),    TrainMode::parse("isl+y"),
      TrainMode::parse("atlas-isl"),
  };
}

AblationTable run_ablation_grid(const Task& task, const TrainConfig& base,
                                const ModelConfig& model, std::size_t num_seeds) {
  if (num_seeds < 1) throw std::invalid_argument("ablation needs at least one seed");
  TrainConfig all_cfg = base;
  const LabelTables tables = build_tables(task, all_cfg, model, /*all=*/true);
  const auto parts = task.base_parts(model);
  AblationTable table;
  for (const auto& mode : ablation_modes()) {
    std::vector<double> b, n, h;
    for (std::size_t s = 0; s < num_seeds; ++s) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      cfg.mode.mix_weight = base.mode.mix_weight;
      cfg.seed = base.seed + s;
      const auto report = run_training(task.train, parts, task.init_prompt, tables, cfg);
      const auto eval = evaluate_base_new(report.final_prompt, task, model);
      table.rows.push_back({mode.name(), cfg.seed, eval});
      b.push_back(eval.base_acc);
      n.push_back(eval.new_acc);
      h.push_back(eval.harmonic_mean);
    }
    table.medians.push_back({mode.name(), 0, EvalResult{median(b), median(n), median(h)}});
  }
  return table;
}

void write_ablation_csv(std::ostream& out, const AblationTable& table) {
  out << "mode,seed,base_acc,new_acc,harmonic_mean\n";
  const auto row = [&](const AblationRow& r, const std::string& seed) {
    out << r.mode << ',' << seed << ',' << csv::format_double(r.eval.base_acc) << ','
        << csv::format_double(r.eval.new_acc) << ',' << csv::format_double(r.eval.harmonic_mean)
        << '\n';
  };
  for (const auto& r : table.rows) row(r, std::to_string(r.seed));
  for (const auto& r : table.medians) row(r, "median");
}

DirectionalResult run_directional_check(const SyntheticTaskConfig& task_cfg,
                                        const TrainConfig& base, const ModelConfig& model,
                                        std::size_t num_seeds) {
  if (num_seeds < 1) throw std::invalid_argument("directional check needs at least one seed");
  std::vector<double> new_onehot, new_isl, h_soft, h_alt;
  for (std::size_t s = 0; s < num_seeds; ++s) {
    SyntheticTaskConfig tc = task_cfg;
    tc.seed = task_cfg.seed + s;
    const Task task = generate_task(tc);
    const auto run_mode = [&](const char* name) {
      TrainConfig cfg = base;
      cfg.mode = TrainMode::parse(name, base.mode.mix_weight);
      cfg.seed = base.seed + s;
      return train_and_evaluate(task, cfg, model).eval;
    };
    new_onehot.push_back(run_mode("onehot").new_acc);
    new_isl.push_back(run_mode("atlas-isl").new_acc);
    h_soft.push_back(run_mode("ls").harmonic_mean);
    h_alt.push_back(run_mode("atlas").harmonic_mean);
  }
  DirectionalResult r;
  r.median_new_onehot = median(new_onehot);
  r.median_new_atlas_isl = median(new_isl);
  r.median_h_soft_only = median(h_soft);
  r.median_h_alternating = median(h_alt);
  r.isl_beats_onehot_on_new = r.median_new_atlas_isl >= r.median_new_onehot;
  r.alternating_beats_soft_only_on_h = r.median_h_alternating >= r.median_h_soft_only;
  return r;
}

}  // namespace atlas
