// SPDX-License-Identifier: Apache-2.0
//
// Property-based acceptance suite. Prints one PASS/FAIL line per criterion
// and exits nonzero if any blocking criterion fails. The directional check is
// reported but never blocks.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "atlas/diagnostics.hpp"
#include "atlas/harness.hpp"
#include "atlas/labels.hpp"
#include "atlas/model.hpp"
#include "atlas/trainer.hpp"
#include "cli.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace atlas;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool valid_distribution(const ProbabilityVector& p) {
  double s = 0.0;
  for (double x : p) {
    if (!(x >= -1e-12)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= 1e-9;
}

Outcome label_invariants() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> classes(2, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t failures = 0;
  const int cases = 10000;
  for (int i = 0; i < cases; ++i) {
    const std::size_t c = classes(rng);
    const OneHotLabel y(std::uniform_int_distribution<std::size_t>(0, c - 1)(rng), c);
    bool ok = true;
    switch (i % 5) {
      case 0:
        ok = valid_distribution(vanilla_smooth(y, SmoothingConfig::uniform(c, unit(rng))));
        break;
      case 1: {
        std::vector<Vector> emb;
        for (std::size_t k = 0; k < c; ++k) emb.push_back(testing::random_vector(rng, 6));
        const auto table = build_csl(emb, 0.005 + 0.2 * unit(rng));
        for (std::size_t r = 0; r < c && ok; ++r) {
          const auto row = table.row(r);
          ok = valid_distribution(row);
          for (std::size_t j = 0; j < c && ok; ++j) ok = row[j] <= row[r];
        }
        break;
      }
      case 2: {
        const std::map<std::string, ProbabilityVector> p{{"x", testing::random_distribution(rng, c)}};
        const std::map<std::string, OneHotLabel> labels{{"x", y}};
        ok = valid_distribution(build_isl(p, labels, 2.0 * unit(rng), i % 2 == 0).at("x"));
        break;
      }
      case 3:
        ok = valid_distribution(select_label(static_cast<int>(i % 2), y,
                                             testing::random_distribution(rng, c)));
        break;
      default:
        ok = valid_distribution(mix_csl_isl(testing::random_distribution(rng, c),
                                            testing::random_distribution(rng, c),
                                            MixWeight(unit(rng))));
    }
    if (!ok) ++failures;
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << cases << " cases, " << failures << " failures, " << t << " s";
  return {failures == 0 && t < 10.0, d.str()};
}

Outcome gradient_check() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  double worst = 0.0;
  const std::size_t configs = 120;
  for (std::size_t i = 0; i < configs; ++i) {
    const ModelDims dims{1 + i % 4, 1 + (i * 5) % 8, 1 + (i * 3) % 8, 2 + (i * 7) % 7};
    const double tau = 0.05 + 0.1 * static_cast<double>(i % 6);
    auto prob = testing::random_problem(1000 + i, dims, 2 + i % 9, 1, tau);
    const auto& x = prob.samples[0];
    const auto target = testing::random_distribution(rng, prob.parts.num_classes());
    const Vector v0(prob.prompt.flat().begin(), prob.prompt.flat().end());
    const auto fd = testing::finite_difference_gradient(
        [&](const Vector& w) {
          return loss(PromptParams(dims.prompt_length, dims.prompt_dim, w), x, target, prob.parts);
        },
        v0);
    const auto g = grad_prompt(prob.prompt, x, target, prob.parts);
    worst = std::max(worst,
                     testing::max_relative_error(Vector(g.flat().begin(), g.flat().end()), fd));
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << configs << " configs, max rel err " << worst << ", " << t << " s";
  return {worst <= 1e-6 && t < 30.0, d.str()};
}

Outcome schedule_exactness() {
  std::size_t mismatches = 0;
  for (int K = 1; K <= 5; ++K) {
    for (int E = 1; E <= 20; ++E) {
      int soft = 0;
      for (int e = 0; e < E; ++e) {
        const int xi = schedule_phase(e, K);
        if (xi != ((e + 1) % K == 0 ? 0 : 1)) ++mismatches;
        if (xi == 0) ++soft;
      }
      if (soft != E / K) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches over K 1..5, E 1..20"};
}

Outcome lemma_checks() {
  std::size_t failures = 0;
  std::size_t checks = 0;
  double worst_gap = -1e300;
  std::mt19937_64 rng(5);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::size_t c = 2 + i % 5;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 32)(rng);
    auto prob = testing::random_problem(500 + i, {2, 3, 3, 5}, c, n, 0.2);
    for (double theta : {0.0, 0.1, 0.5, 1.0}) {
      for (int K : {1, 2, 3}) {
        const auto l2 = lemma2_check(prob.prompt, prob.samples, prob.parts, theta, K);
        worst_gap = std::max(worst_gap, l2.lhs - l2.rhs);
        failures += l2.lhs <= l2.rhs + 1e-9 ? 0 : 1;
        ++checks;
      }
      const auto l3 = lemma3_check(prob.prompt, prob.samples, prob.parts, theta);
      worst_gap = std::max(worst_gap, l3.lhs - l3.rhs);
      failures += l3.lhs <= l3.rhs + 1e-9 ? 0 : 1;
      ++checks;
    }
  }
  std::ostringstream d;
  d << checks << " checks, " << failures << " failures, max lhs-rhs " << worst_gap;
  return {failures == 0, d.str()};
}

Outcome bound_ordering() {
  std::size_t failures = 0;
  std::size_t cells = 0;
  for (double theta : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
    for (int K = 2; K <= 5; ++K) {
      for (double kappa : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        BoundInputs in;
        in.F0 = 1.3;
        in.eta = 0.2;
        in.T = 500;
        in.sigma2 = 0.7;
        in.theta = theta;
        in.K = K;
        in.kappa = kappa;
        const double a = atlas_bound(in);
        const double l = ls_bound(in);
        const bool ok = kappa == 1.0 ? std::abs(a - l) <= 1e-12 : ((a < l) == (kappa > 1.0));
        failures += ok ? 0 : 1;
        ++cells;
      }
    }
  }
  return {failures == 0, std::to_string(cells) + " grid cells, " + std::to_string(failures) +
                             " failures"};
}

Outcome theorem1() {
  const auto start = Clock::now();
  double measured = 0.0;
  double bound = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    SyntheticTaskConfig tc;
    tc.seed = static_cast<std::uint64_t>(s);
    const Task task = generate_task(tc);
    DiagnosisConfig cfg;
    cfg.T = 500;
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto d = run_diagnosis(task.train, task.base_parts(ModelConfig{}), task.init_prompt, cfg);
    measured += d.report.measured_avg_sq_grad / seeds;
    bound += d.report.atlas_bound / seeds;
  }
  const double t = seconds_since(start);
  std::ostringstream d;
  d << "mean avg |grad F|^2 " << measured << " vs mean bound " << bound << " x 1.05, " << t
    << " s";
  return {measured <= bound * (1.0 + kTheorem1Slack) && t < 120.0, d.str()};
}

bool same_report(const TrainReport& a, const TrainReport& b, bool compare_phase) {
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EpochRecord x = a.epochs[e];
    EpochRecord y = b.epochs[e];
    if (!compare_phase) x.xi = y.xi;
    if (!(x == y)) return false;
  }
  return a.final_prompt == b.final_prompt && a.total_steps == b.total_steps && a.eta == b.eta;
}

Outcome mode_equivalences() {
  SyntheticTaskConfig tc;
  tc.seed = 3;
  const Task task = generate_task(tc);
  const auto parts = task.base_parts(ModelConfig{});
  const auto tables = build_tables(task, TrainConfig{}, ModelConfig{}, true);
  const auto train = [&](const std::string& mode, double theta, int K) {
    TrainConfig cfg;
    cfg.mode = TrainMode::parse(mode);
    cfg.theta = theta;
    cfg.K = K;
    cfg.epochs = 6;
    return run_training(task.train, parts, task.init_prompt, tables, cfg);
  };
  // The xi column records the schedule, so only the theta = 0 case ignores it.
  const bool zero_theta = same_report(train("atlas", 0.0, 2), train("onehot", 0.0, 2), false);
  const bool period_one = same_report(train("atlas", 0.1, 1), train("ls", 0.1, 1), true);
  const bool long_period = same_report(train("atlas", 0.1, 7), train("onehot", 0.1, 7), true);
  std::ostringstream d;
  d << "theta=0 vs onehot " << (zero_theta ? "identical" : "differs") << "; K=1 vs soft-only "
    << (period_one ? "identical" : "differs") << "; K>E vs onehot "
    << (long_period ? "identical" : "differs");
  return {zero_theta && period_one && long_period, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& root) {
  struct Invocation {
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Invocation> runs{
      {{"train", "--mode", "atlas-mix", "--seed", "4"},
       {"train_report.csv", "prompt.csv", "eval.csv"}},
      {{"ablate", "--seeds", "2", "--epochs", "4", "--seed", "4"}, {"ablation.csv"}},
      {{"diagnose", "--seed", "4"}, {"bound_report.csv", "grad_norms.csv"}},
  };
  const char* previous = std::getenv("ATLAS_OPT_THREADS");
  const std::string saved = previous ? previous : "";
  std::size_t mismatches = 0;
  std::size_t errors = 0;
  for (const auto& r : runs) {
    std::vector<std::string> reference;
    for (const char* threads : {"1", "2", "3", "8"}) {
      setenv("ATLAS_OPT_THREADS", threads, 1);
      const fs::path dir = root / "determinism" / (r.args[0] + "_t" + threads);
      auto args = r.args;
      args.insert(args.end(), {"--out", dir.string()});
      std::ostringstream out, err;
      if (cli::cli_dispatch(args, out, err) != cli::kExitOk) {
        std::cerr << err.str();
        ++errors;
        continue;
      }
      std::vector<std::string> contents;
      for (const auto& f : r.files) contents.push_back(slurp(dir / f));
      if (reference.empty()) {
        reference = contents;
      } else if (contents != reference) {
        ++mismatches;
      }
    }
  }
  if (previous) {
    setenv("ATLAS_OPT_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("ATLAS_OPT_THREADS");
  }
  std::ostringstream d;
  d << "train/ablate/diagnose at 1,2,3,8 workers: " << mismatches << " mismatches, " << errors
    << " errors";
  return {mismatches == 0 && errors == 0, d.str()};
}

std::vector<std::pair<std::string, Outcome>> directional() {
  const auto r = run_directional_check(SyntheticTaskConfig{}, TrainConfig{}, ModelConfig{}, 10);
  std::ostringstream a, b;
  a << "median new acc atlas-isl " << r.median_new_atlas_isl << " vs onehot "
    << r.median_new_onehot;
  b << "median H alternating " << r.median_h_alternating << " vs soft-only "
    << r.median_h_soft_only;
  return {{"directional: atlas-isl new acc >= onehot", {r.isl_beats_onehot_on_new, a.str()}},
          {"directional: alternating H >= soft-only", {r.alternating_beats_soft_only_on_h, b.str()}}};
}

Outcome harmonic_oracle() {
  const double h = harmonic_mean(0.8269, 0.6323);
  std::ostringstream d;
  d << "harmonic_mean(0.8269, 0.6323) = " << h;
  return {std::abs(h - 0.7166) <= 1e-4, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ATLaS acceptance suite", "acceptance"};
  std::string out_dir = "acceptance_runs";
  app.add_option("--out", out_dir, "scratch directory for CLI runs");
  CLI11_PARSE(app, argc, argv);
  const fs::path root(out_dir);
  fs::remove_all(root / "determinism");

  bool blocking_ok = true;
  const auto report = [&](const std::string& name, const std::function<Outcome()>& check,
                          bool blocking) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << (blocking ? "" : " (soft)") << "  ["
              << o.detail << "]" << std::endl;
    if (blocking && !o.pass) blocking_ok = false;
  };

  report("label invariants", label_invariants, true);
  report("gradient finite differences", gradient_check, true);
  report("schedule exactness", schedule_exactness, true);
  report("variance inequalities", lemma_checks, true);
  report("bound ordering", bound_ordering, true);
  report("convergence bound over trajectories", theorem1, true);
  report("mode equivalences", mode_equivalences, true);
  report("determinism across worker counts", [&] { return determinism(root); }, true);
  std::vector<std::pair<std::string, Outcome>> dir;
  try {
    dir = directional();
  } catch (const std::exception& e) {
    dir = {{"directional check", {false, std::string("threw: ") + e.what()}}};
  }
  for (const auto& [name, o] : dir) report(name, [o = o] { return o; }, false);
  report("harmonic-mean oracle", harmonic_oracle, true);

  return blocking_ok ? 0 : 1;
}
