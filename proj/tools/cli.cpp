// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "atlas/csv.hpp"
#include "atlas/data_io.hpp"
#include "atlas/diagnostics.hpp"
#include "atlas/experiment_config.hpp"
#include "atlas/harness.hpp"
#include "atlas/labels.hpp"
#include "atlas/trainer.hpp"

namespace atlas::cli {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::string>& setting_help() {
  static const std::map<std::string, std::string> help = {
      {"preset", "hyperparameter preset: default, base2new, fewshot, transfer"},
      {"out", "output directory"},
      {"data", "task directory (train.csv, class_texts.csv, optional test.csv and task.cfg)"},
      {"seed", "seed for task generation, prompt init and shuffling"},
      {"mode", "supervision mode, e.g. onehot, ls, atlas, atlas-csl, atlas-isl, mix+y"},
      {"mix-weight", "CSL weight when mixing CSL and ISL labels"},
      {"eta", "learning rate"},
      {"epochs", "training epochs"},
      {"batch-size", "mini-batch size"},
      {"K", "alternation period: every K-th epoch uses soft labels"},
      {"theta", "uniform smoothing strength"},
      {"tau-c", "temperature of the class-wise soft labels"},
      {"alpha", "one-hot boost of the instance-wise soft labels"},
      {"force-delta", "always boost the instance-wise labels"},
      {"tau", "classifier temperature"},
      {"c-base", "synthetic base classes"},
      {"c-new", "synthetic new classes"},
      {"shots", "training images per base class"},
      {"test-shots", "test images per class"},
      {"noise-std", "image noise standard deviation"},
      {"domain-shift", "shared image offset relative to the prototype norm"},
      {"token-correlation", "correlation between class token and latent concept"},
      {"M", "number of context vectors"},
      {"d-p", "context vector dimension"},
      {"d-cls", "class token dimension"},
      {"d-t", "embedding dimension"},
      {"seeds", "seeds per ablation mode"},
      {"sweep-param", "swept parameter: theta, tau_c, alpha, K or w"},
      {"sweep-values", "comma-separated grid"},
      {"reps", "repetitions per grid value"},
      {"T", "SGD steps for the bound check"},
      {"diag-batch", "mini-batch size for the bound check"},
      {"probes", "random probes for the smoothness estimate"},
      {"radius", "probe radius for the smoothness estimate"},
      {"checkpoint-interval", "steps between variance checkpoints"},
  };
  return help;
}

struct Invocation {
  std::map<std::string, std::string> values;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;  // per subcommand
  std::string config_path;
  std::string csl_path;
  std::string isl_path;
  std::string prompt_path;
  std::vector<std::string> inputs;

  Settings flags(const std::string& command) const {
    Settings s;
    for (const auto& [key, opt] : options.at(command)) {
      if (opt->count() > 0) s[key] = values.at(key);
    }
    return s;
  }
};

void add_settings(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config_path, "key=value file; command-line flags take precedence");
  for (const auto& key : setting_keys()) {
    auto& slot = inv.values[key];
    const auto& help = setting_help().at(key);
    auto& opts = inv.options[sub->get_name()];
    if (key == "force-delta") {
      opts[key] = sub->add_flag("--" + key + "{true}", slot, help);
    } else {
      opts[key] = sub->add_option("--" + key, slot, help);
    }
  }
}

Task obtain_task(const ExperimentConfig& cfg) {
  if (cfg.data_dir.empty()) return generate_task(cfg.task);
  return load_task(cfg.data_dir,
                   TaskMeta{cfg.task.seed, 0, cfg.task.dims.prompt_length, cfg.task.dims.prompt_dim});
}

fs::path prepare_out(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

template <typename T, typename Reader>
T load_file(const std::string& path, Reader&& read) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return read(in);
  } catch (const csv::ParseError& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_eval_csv(const fs::path& path, const Task& task, const PromptParams& v,
                    const ModelConfig& model, std::ostream& log) {
  if (task.test.empty()) {
    log << "no test.csv; skipping evaluation\n";
    return;
  }
  auto out = open_out(path);
  if (task.new_classes() == 0) {
    const double base = evaluate(v, task.test, task.all_parts(model), task.base_subset());
    out << "base_acc\n" << csv::format_double(base) << '\n';
    log << "base " << base << '\n';
    return;
  }
  const EvalResult r = evaluate_base_new(v, task, model);
  out << "base_acc,new_acc,harmonic_mean\n"
      << csv::format_double(r.base_acc) << ',' << csv::format_double(r.new_acc) << ','
      << csv::format_double(r.harmonic_mean) << '\n';
  log << "base " << r.base_acc << "  new " << r.new_acc << "  H " << r.harmonic_mean << '\n';
}

int cmd_gen_synth(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = generate_task(cfg.task);
  save_task(cfg.out_dir, task, cfg.task.seed);
  out << "wrote synthetic task (" << task.base_classes << " base, " << task.new_classes()
      << " new classes, " << task.train.size() << " train, " << task.test.size()
      << " test samples) to " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_gen_csl(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = obtain_task(cfg);
  TrainConfig tc = cfg.train;
  tc.mode = TrainMode::parse("csl");
  const auto tables = build_tables(task, tc, cfg.model);
  const fs::path dir = prepare_out(cfg);
  auto f = open_out(dir / "csl.csv");
  write_csl_csv(f, *tables.csl);
  out << "CSL table over " << tables.csl->num_classes() << " classes, column-diagonal dominant: "
      << (tables.csl->column_diagonal_dominant() ? "yes" : "no") << '\n';
  return kExitOk;
}

int cmd_gen_isl(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = obtain_task(cfg);
  TrainConfig tc = cfg.train;
  tc.mode = TrainMode::parse("isl");
  const auto tables = build_tables(task, tc, cfg.model);
  const fs::path dir = prepare_out(cfg);
  auto f = open_out(dir / "isl.csv");
  write_isl_csv(f, *tables.isl);
  const auto& st = tables.isl->stats();
  out << "ISL labels for " << st.num_samples << " samples; " << st.num_mismatched
      << " zero-shot misses, fraction corrected " << st.fraction_argmax_corrected() << '\n';
  return kExitOk;
}

LabelTables tables_for_training(const Task& task, const ExperimentConfig& cfg,
                                const Invocation& inv) {
  LabelTables tables = build_tables(task, cfg.train, cfg.model);
  if (!inv.csl_path.empty()) {
    tables.csl = load_file<CslTable>(inv.csl_path, [](std::istream& in) { return read_csl_csv(in); });
    if (tables.csl->num_classes() != task.base_classes) {
      throw std::invalid_argument(inv.csl_path + ": CSL table covers " +
                                  std::to_string(tables.csl->num_classes()) + " classes, task has " +
                                  std::to_string(task.base_classes) + " base classes");
    }
  }
  if (!inv.isl_path.empty()) {
    tables.isl = load_file<IslTable>(inv.isl_path, [](std::istream& in) { return read_isl_csv(in); });
    for (const auto& s : task.train) {
      if (!tables.isl->contains(s.id)) {
        throw std::invalid_argument(inv.isl_path + ": no label for sample " + s.id);
      }
    }
  }
  return tables;
}

int cmd_train(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  const Task task = obtain_task(cfg);
  const LabelTables tables = tables_for_training(task, cfg, inv);
  const TrainReport report =
      run_training(task.train, task.base_parts(cfg.model), task.init_prompt, tables, cfg.train);
  const fs::path dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "train_report.csv");
    write_train_report_csv(f, report);
  }
  save_prompt(dir / "prompt.csv", report.final_prompt);
  {
    auto f = open_out(dir / "config.cfg");
    write_settings(f, to_settings(cfg));
  }
  const auto& last = report.epochs.back();
  out << cfg.train.mode.name() << ": " << report.epochs.size() << " epochs, " << report.total_steps
      << " steps, final loss " << last.mean_loss << ", train acc " << last.train_acc << '\n';
  write_eval_csv(dir / "eval.csv", task, report.final_prompt, cfg.model, out);
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  const Task task = obtain_task(cfg);
  const PromptParams v = inv.prompt_path.empty() ? task.init_prompt : load_prompt(inv.prompt_path);
  check_prompt_shape(v, task.encoder);
  write_eval_csv(prepare_out(cfg) / "eval.csv", task, v, cfg.model, out);
  return kExitOk;
}

int cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = obtain_task(cfg);
  if (task.test.empty() || task.new_classes() == 0) {
    throw std::invalid_argument("ablate needs a test set with new classes");
  }
  const AblationTable table = run_ablation_grid(task, cfg.train, cfg.model, cfg.seeds);
  auto f = open_out(prepare_out(cfg) / "ablation.csv");
  write_ablation_csv(f, table);
  for (const auto& m : table.medians) {
    out << m.mode << "  base " << m.eval.base_acc << "  new " << m.eval.new_acc << "  H "
        << m.eval.harmonic_mean << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = obtain_task(cfg);
  if (task.test.empty() || task.new_classes() == 0) {
    throw std::invalid_argument("sweep needs a test set with new classes");
  }
  const SweepSpec spec{cfg.sweep_parameter, cfg.sweep_values, cfg.repetitions};
  const auto rows = run_sweep(spec, cfg.train, cfg.model, task);
  const fs::path dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "sweep.csv");
    write_sweep_csv(f, rows);
  }
  auto svg = open_out(dir / "sweep.svg");
  write_sweep_svg(svg, rows);
  out << rows.size() << " runs over " << spec.parameter << '\n';
  return kExitOk;
}

int cmd_diagnose(const ExperimentConfig& cfg, std::ostream& out) {
  const Task task = obtain_task(cfg);
  const Diagnosis d =
      run_diagnosis(task.train, task.base_parts(cfg.model), task.init_prompt, cfg.diagnosis);
  const fs::path dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "bound_report.csv");
    write_bound_report_csv(f, d.report);
  }
  {
    auto f = open_out(dir / "grad_norms.csv");
    f << "step,sq_grad_norm\n";
    for (std::size_t t = 0; t < d.full_grad_sq_norms.size(); ++t) {
      f << t << ',' << csv::format_double(d.full_grad_sq_norms[t]) << '\n';
    }
  }
  auto txt = open_out(dir / "bound_report.txt");
  write_bound_report_text(txt, d);
  write_bound_report_text(out, d);
  return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, const Invocation& inv, std::ostream& out) {
  if (inv.inputs.empty()) throw std::invalid_argument("report needs --inputs");
  std::vector<SweepRow> rows;
  for (const auto& path : inv.inputs) {
    auto part = load_file<std::vector<SweepRow>>(path, [](std::istream& in) { return read_sweep_csv(in); });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw std::invalid_argument("report: input tables are empty");
  for (const auto& r : rows) {
    if (r.parameter != rows.front().parameter) {
      throw std::invalid_argument("report: inputs sweep different parameters (" +
                                  rows.front().parameter + ", " + r.parameter + ")");
    }
  }
  const fs::path dir = prepare_out(cfg);
  {
    auto f = open_out(dir / "report.csv");
    write_sweep_csv(f, rows);
  }
  auto svg = open_out(dir / "report.svg");
  write_sweep_svg(svg, rows);
  out << "merged " << rows.size() << " rows from " << inv.inputs.size() << " tables\n";
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Alternating label-smoothing prompt tuning on embedding datasets", "atlas"};
  app.require_subcommand(1);
  app.fallthrough(false);

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"gen-synth", "write a synthetic base-to-new task"},
      {"gen-csl", "write the class-wise soft label table"},
      {"gen-isl", "write the instance-wise soft label table"},
      {"train", "train the prompt and evaluate it"},
      {"eval", "evaluate a saved prompt"},
      {"ablate", "run the supervision-mode ablation grid"},
      {"sweep", "sweep one hyperparameter"},
      {"diagnose", "check the variance inequalities and the convergence bound"},
      {"report", "merge sweep tables and plot them"},
  };

  Invocation inv;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_settings(sub, inv);
    subs[c.name] = sub;
  }
  subs["train"]->add_option("--csl", inv.csl_path, "precomputed CSL table (csl.csv)");
  subs["train"]->add_option("--isl", inv.isl_path, "precomputed ISL table (isl.csv)");
  subs["eval"]->add_option("--prompt", inv.prompt_path, "prompt file (defaults to the initial prompt)");
  subs["report"]->add_option("--inputs", inv.inputs, "sweep CSV files")->expected(1, -1);

  std::vector<const char*> argv{"atlas"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto* chosen = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << chosen->help();
    return kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const Settings file = inv.config_path.empty() ? Settings{} : load_settings(inv.config_path);
    const ExperimentConfig cfg = resolve_config(file, inv.flags(name));
    if (name == "gen-synth") return cmd_gen_synth(cfg, out);
    if (name == "gen-csl") return cmd_gen_csl(cfg, out);
    if (name == "gen-isl") return cmd_gen_isl(cfg, out);
    if (name == "train") return cmd_train(cfg, inv, out);
    if (name == "eval") return cmd_eval(cfg, inv, out);
    if (name == "ablate") return cmd_ablate(cfg, out);
    if (name == "sweep") return cmd_sweep(cfg, out);
    if (name == "diagnose") return cmd_diagnose(cfg, out);
    return cmd_report(cfg, inv, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace atlas::cli
