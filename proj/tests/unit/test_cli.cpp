// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "atlas/csv.hpp"
#include "atlas/data_io.hpp"
#include "atlas/experiment_config.hpp"
#include "atlas/harness.hpp"
#include "atlas/labels.hpp"
#include "cli.hpp"

namespace atlas {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("atlas_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Field of a two-line CSV (header, values) by column name.
std::string field(const fs::path& p, const std::string& column) {
  std::ifstream in(p);
  std::string header, values;
  std::getline(in, header);
  std::getline(in, values);
  const auto h = csv::split(header);
  const auto v = csv::split(values);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == column) return v.at(i);
  }
  return "";
}

const std::vector<std::string> kSmall{"--c-base", "4", "--c-new", "4", "--shots", "8",
                                      "--test-shots", "8", "--epochs", "3"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

TEST(Cli, GenSynthThenTrainOnFiles) {
  const auto data = scratch("data");
  const auto out = scratch("train");
  auto r = run(with({"gen-synth", "--seed", "7", "--out", data.string()}, kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run(with({"train", "--mode", "atlas-isl", "--data", data.string(), "--out", out.string()},
               kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"train_report.csv", "prompt.csv", "config.cfg", "eval.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }

  // Written files load back through the public readers.
  std::ifstream report(out / "train_report.csv");
  EXPECT_EQ(read_train_report_csv(report).size(), 3u);
  EXPECT_EQ(load_prompt(out / "prompt.csv").length(), 4u);
  const auto cfg = resolve_config(load_settings((out / "config.cfg").string()), {});
  EXPECT_EQ(cfg.train.mode.name(), "atlas-isl");
  EXPECT_EQ(cfg.train.epochs, 3);

  r = run({"eval", "--data", data.string(), "--prompt", (out / "prompt.csv").string(), "--out",
           (out / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(out / "eval" / "eval.csv"), slurp(out / "eval.csv"));
}

TEST(Cli, PrecomputedTablesFeedTraining) {
  const auto dir = scratch("tables");
  const auto base = with({"--seed", "3", "--out", dir.string()}, kSmall);
  ASSERT_EQ(run(with({"gen-csl"}, base)).code, 0);
  ASSERT_EQ(run(with({"gen-isl"}, base)).code, 0);
  std::ifstream csl(dir / "csl.csv");
  EXPECT_EQ(read_csl_csv(csl).num_classes(), 4u);

  const auto trained = dir / "from_files";
  auto r = run(with({"train", "--mode", "atlas-mix", "--csl", (dir / "csl.csv").string(), "--isl",
                     (dir / "isl.csv").string(), "--seed", "3", "--out", trained.string()},
                    kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fresh = dir / "fresh";
  r = run(with({"train", "--mode", "atlas-mix", "--seed", "3", "--out", fresh.string()}, kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(trained / "prompt.csv"), slurp(fresh / "prompt.csv"));

  r = run(with({"train", "--mode", "atlas-csl", "--csl", (dir / "csl.csv").string(), "--c-base", "5",
                "--out", trained.string()},
               {}));
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ValidationErrorsExitOne) {
  auto r = run({"train", "--K", "0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("K must be ≥ 1"), std::string::npos);

  r = run({"train", "--no-such-flag", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);

  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"train", "--mode", "bogus"}).code, 1);
  EXPECT_EQ(run({"train", "--config", "/nonexistent.cfg"}).code, 1);
  EXPECT_EQ(run({"train", "--data", "/nonexistent_dir"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  const auto dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "preset=fewshot\nepochs=2\ntheta=0.3\n";
  auto r = run(with({"train", "--config", (dir / "run.cfg").string(), "--theta", "0.2", "--out",
                     (dir / "out").string()},
                    {"--c-base", "3", "--c-new", "2", "--shots", "4", "--test-shots", "4"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cfg = resolve_config(load_settings((dir / "out" / "config.cfg").string()), {});
  EXPECT_EQ(cfg.train.theta, 0.2);
  EXPECT_EQ(cfg.train.epochs, 2);
  EXPECT_EQ(cfg.train.K, 3);
}

TEST(Cli, DiagnoseReportsPassingBounds) {
  const auto dir = scratch("diagnose");
  auto r = run({"diagnose", "--seed", "0", "--T", "200", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv_path = dir / "bound_report.csv";
  EXPECT_EQ(field(csv_path, "lemma2_pass"), "true");
  EXPECT_EQ(field(csv_path, "lemma3_pass"), "true");
  EXPECT_EQ(field(csv_path, "theorem1_pass"), "true");
  EXPECT_EQ(field(csv_path, "T"), "200");
  std::ifstream norms(dir / "grad_norms.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(norms, line)) ++lines;
  EXPECT_EQ(lines, 201u);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(Cli, SweepThenReport) {
  const auto dir = scratch("sweep");
  const auto a = dir / "a";
  const auto b = dir / "b";
  auto r = run(with({"sweep", "--sweep-param", "theta", "--sweep-values", "0,0.2", "--out",
                     a.string()},
                    kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  r = run(with({"sweep", "--sweep-param", "theta", "--sweep-values", "0.4", "--out", b.string()},
               kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(a / "sweep.svg"));

  r = run({"report", "--inputs", (a / "sweep.csv").string(), (b / "sweep.csv").string(), "--out",
           dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream merged(dir / "report.csv");
  EXPECT_EQ(read_sweep_csv(merged).size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "report.svg"));

  const auto k = dir / "k";
  ASSERT_EQ(run(with({"sweep", "--sweep-param", "K", "--sweep-values", "1", "--out", k.string()},
                     kSmall))
                .code,
            0);
  EXPECT_EQ(run({"report", "--inputs", (a / "sweep.csv").string(), (k / "sweep.csv").string(),
                 "--out", dir.string()})
                .code,
            1);
}

TEST(Cli, AblateWritesMedians) {
  const auto dir = scratch("ablate");
  auto r = run(with({"ablate", "--seeds", "2", "--out", dir.string()}, kSmall));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir / "ablation.csv");
  EXPECT_NE(text.find("atlas-isl,median,"), std::string::npos);
  EXPECT_NE(text.find("onehot,1,"), std::string::npos);
}

}  // namespace
}  // namespace atlas
