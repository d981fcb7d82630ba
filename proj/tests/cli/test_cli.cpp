// Copyright 2026 The regcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "regcal/data.hpp"
#include "regcal/error.hpp"
#include "regcal/rng.hpp"
#include "regcal_cli.hpp"

namespace regcal::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  for (std::string f; std::getline(s, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("regcal_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cli(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(std::move(args), out_, err_);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string toy(std::size_t n = 200, const std::string& name = "toy.csv") {
    EXPECT_EQ(cli({"generate-toy", "--n", std::to_string(n), "--seed", "7", "--out", path(name)}), kOk)
        << err_.str();
    return path(name);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(Cli, GenerateToyWritesRowsAndSidecar) {
  EXPECT_EQ(cli({"generate-toy", "--n", "2000", "--seed", "7", "--out", path("toy.csv")}), kOk);
  const auto lines = read_lines(path("toy.csv"));
  ASSERT_EQ(lines.size(), 2001u);
  EXPECT_EQ(lines[0], "x,y");
  const json m = json::parse(slurp(path("toy.csv.manifest.json")));
  EXPECT_EQ(m["params"]["n"], 2000);
  EXPECT_EQ(m["params"]["seed"], 7);
  EXPECT_EQ(m["command"], "generate-toy");
}

TEST_F(Cli, GenerateToyIsByteDeterministic) {
  const auto a = toy(500, "a.csv");
  const auto b = toy(500, "b.csv");
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, GenerateToyRejectsZeroNoise) {
  EXPECT_EQ(cli({"generate-toy", "--noise-std", "0", "--out", path("t.csv")}), kUsage);
  EXPECT_NE(err_.str().find("noise_std"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("t.csv")));
}

TEST_F(Cli, RunWritesOneRowPerFold) {
  const auto data = toy(400);
  EXPECT_EQ(cli({"run", "--dataset", data, "--base", "ols", "--method", "gpc", "--train-thresholds", "16",
                 "--predict-thresholds", "256", "--gpc-cap", "200", "--repeats", "1", "--seed", "7", "--out",
                 path("out")}),
            kOk)
      << err_.str();
  const auto lines = read_lines(path("out/results.csv"));
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], kResultsHeader);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = fields(lines[i]);
    ASSERT_EQ(f.size(), 8u);
    EXPECT_EQ(f[0], "0");
    EXPECT_EQ(f[1], std::to_string(i - 1));
    EXPECT_EQ(f[2], "gpc");
    EXPECT_EQ(f[3], "ols");
    EXPECT_EQ(f[4], "16");
    EXPECT_TRUE(std::isfinite(std::stod(f[5])));
  }
  const json summary = json::parse(slurp(path("out/summary.json")));
  EXPECT_EQ(summary["completed"], 5);
  EXPECT_EQ(summary["failed"], 0);
  const json manifest = json::parse(slurp(path("out/manifest.json")));
  EXPECT_EQ(manifest["outputs"].size(), 3u);
  for (const auto& p : manifest["outputs"]) EXPECT_TRUE(fs::exists(p.get<std::string>()));
  EXPECT_EQ(manifest["folds"].size(), 5u);
}

TEST_F(Cli, RunBaselineRows) {
  const auto data = toy();
  EXPECT_EQ(cli({"run", "--dataset", data, "--method", "none", "--repeats", "2", "--out", path("o")}), kOk);
  const auto lines = read_lines(path("o/results.csv"));
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(fields(lines[1])[2], "none");
}

TEST_F(Cli, UnknownMethodIsUsageError) {
  EXPECT_EQ(cli({"run", "--method", "foo"}), kUsage);
  EXPECT_NE(err_.str().find("method"), std::string::npos);
  EXPECT_EQ(cli({"run", "--no-such-flag"}), kUsage);
  EXPECT_EQ(cli({}), kUsage);
  EXPECT_EQ(cli({"run", "--folds", "-3"}), kUsage);
}

TEST_F(Cli, PartialFailureExitsTwo) {
  std::ofstream csv(path("spike.csv"));
  csv << "x,y\n";
  for (int i = 0; i < 10; ++i) csv << i << ',' << (i == 4 ? 1 : 0) << '\n';
  csv.close();
  EXPECT_EQ(cli({"run", "--dataset", path("spike.csv"), "--method", "none", "--repeats", "1", "--out",
                 path("o")}),
            kPartialFailure);
  const json manifest = json::parse(slurp(path("o/manifest.json")));
  int failed = 0;
  for (const auto& f : manifest["folds"]) {
    if (f["status"] == "failed") {
      ++failed;
      EXPECT_FALSE(f["error"].get<std::string>().empty());
    }
  }
  EXPECT_EQ(failed, 1);
  const auto lines = read_lines(path("o/results.csv"));
  int nan_rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) nan_rows += fields(lines[i])[5] == "nan";
  EXPECT_EQ(nan_rows, 1);
}

TEST_F(Cli, IoFailuresExitThree) {
  EXPECT_EQ(cli({"run", "--dataset", path("missing.csv"), "--repeats", "1"}), kIoFailure);
  EXPECT_EQ(cli({"run", "--config", path("missing.cfg")}), kIoFailure);
  const auto data = toy();
  std::ofstream(path("blocker")) << "file";
  EXPECT_EQ(cli({"run", "--dataset", data, "--repeats", "1", "--out", path("blocker/sub")}), kIoFailure);
  EXPECT_EQ(cli({"generate-toy", "--out", path("blocker/toy.csv")}), kIoFailure);
}

TEST_F(Cli, ConfigFileWithFlagOverrides) {
  const auto data = toy();
  std::ofstream(path("c.cfg")) << "# experiment\nmethod = e-logistic\nrepeats=1\nfolds=3\nseed=11\n\ndataset="
                               << data << "\n";
  EXPECT_EQ(cli({"run", "--config", path("c.cfg"), "--folds", "4", "--print-config"}), kOk);
  const ExperimentConfig printed = parse_config(out_.str());
  EXPECT_EQ(printed.method, Method::ELogistic);
  EXPECT_EQ(printed.folds, 4u);
  EXPECT_EQ(printed.seed, 11u);
  EXPECT_EQ(printed.dataset, data);

  EXPECT_EQ(cli({"run", "--config", path("c.cfg"), "--out", path("o")}), kOk);
  EXPECT_EQ(read_lines(path("o/results.csv")).size(), 4u);

  std::ofstream(path("bad.cfg")) << "repeats=1\nbogus=2\n";
  EXPECT_EQ(cli({"run", "--config", path("bad.cfg")}), kUsage);
  EXPECT_NE(err_.str().find("bogus"), std::string::npos);
  std::ofstream(path("bad2.cfg")) << "folds=1\n";
  EXPECT_EQ(cli({"run", "--config", path("bad2.cfg")}), kUsage);
  EXPECT_NE(err_.str().find("folds"), std::string::npos);
}

TEST(ConfigText, RoundTripsRandomConfigs) {
  Rng rng(5);
  const Method methods[] = {Method::None, Method::ELogistic, Method::EBeta, Method::Gpc};
  const BaseKind bases[] = {BaseKind::Ols, BaseKind::Brr, BaseKind::Gpr};
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig c;
    c.dataset = "set" + std::to_string(trial);
    c.method = methods[trial % 4];
    c.base = bases[trial % 3];
    c.ensemble = trial % 2 ? Ensemble::Cdf : Ensemble::Density;
    c.train_thresholds = 2 + static_cast<std::size_t>(rng.uniform(0, 100));
    c.predict_thresholds = 2 + static_cast<std::size_t>(rng.uniform(0, 2000));
    c.repeats = 1 + static_cast<std::size_t>(rng.uniform(0, 20));
    c.folds = 2 + static_cast<std::size_t>(rng.uniform(0, 10));
    c.seed = rng.next();
    c.gpc_cap = 1 + static_cast<std::size_t>(rng.uniform(0, 9000));
    c.reliability_bins = 1 + static_cast<std::size_t>(rng.uniform(0, 20));
    c.jobs = 1 + static_cast<std::size_t>(rng.uniform(0, 8));
    const ExperimentConfig back = parse_config(format_config(c));
    EXPECT_EQ(format_config(back), format_config(c));
    EXPECT_EQ(back.seed, c.seed);
    EXPECT_EQ(back.method, c.method);
  }
}

TEST(ConfigText, Errors) {
  try {
    parse_config("repeats\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  EXPECT_THROW(parse_config("seed=abc"), Error);
  EXPECT_THROW(parse_config("folds=3x"), Error);
  EXPECT_THROW(parse_config("base=svm"), Error);
}

TEST_F(Cli, ManifestConfigRoundTrips) {
  const auto data = toy();
  EXPECT_EQ(cli({"run", "--dataset", data, "--method", "e-beta", "--repeats", "1", "--seed", "99", "--jobs", "2",
                 "--out", path("o")}),
            kOk);
  const json manifest = json::parse(slurp(path("o/manifest.json")));
  ExperimentConfig c;
  for (const auto& [k, v] : manifest["config"].items()) set_config_value(c, k, v.get<std::string>());
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.jobs, 2u);
  EXPECT_EQ(c.method, Method::EBeta);
  EXPECT_EQ(c.dataset, data);
}

TEST_F(Cli, JobsDoNotChangeResults) {
  const auto data = toy(300);
  auto without_time = [](const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    for (const auto& l : lines) out.push_back(l.substr(0, l.rfind(',')));
    return out;
  };
  EXPECT_EQ(cli({"run", "--dataset", data, "--repeats", "2", "--jobs", "1", "--out", path("a")}), kOk);
  EXPECT_EQ(cli({"run", "--dataset", data, "--repeats", "2", "--jobs", "3", "--out", path("b")}), kOk);
  EXPECT_EQ(without_time(read_lines(path("a/results.csv"))), without_time(read_lines(path("b/results.csv"))));
}

TEST_F(Cli, DefaultSweepGivesFiveRowsPerMethod) {
  const auto data = toy();
  EXPECT_EQ(cli({"sweep", "--dataset", data, "--methods", "none,e-beta", "--repeats", "1", "--out", path("s")}),
            kOk);
  const auto summary = read_lines(path("s/sweep_summary.csv"));
  ASSERT_EQ(summary.size(), 11u);
  EXPECT_EQ(summary[0], kSweepSummaryHeader);
  const std::vector<std::string> ks = {"8", "16", "32", "48", "64"};
  for (std::size_t i = 0; i < 10; ++i) {
    const auto f = fields(summary[i + 1]);
    EXPECT_EQ(f[0], i < 5 ? "none" : "e-beta");
    EXPECT_EQ(f[2], ks[i % 5]);
  }
  EXPECT_EQ(read_lines(path("s/sweep_results.csv")).size(), 51u);
}

TEST_F(Cli, SweepListAndValidation) {
  const auto data = toy();
  EXPECT_EQ(cli({"sweep", "--dataset", data, "--sweep", "8,16", "--repeats", "1", "--out", path("s")}), kOk);
  EXPECT_EQ(read_lines(path("s/sweep_summary.csv")).size(), 3u);
  EXPECT_EQ(cli({"sweep", "--dataset", data, "--sweep", "", "--repeats", "1"}), kUsage);
  EXPECT_EQ(cli({"sweep", "--dataset", data, "--sweep", "8,1", "--repeats", "1"}), kUsage);
}

TEST_F(Cli, ReliabilityRowsAreBounded) {
  const auto data = toy(400);
  EXPECT_EQ(cli({"reliability", "--dataset", data, "--methods", "none,e-beta", "--repeats", "1", "--out",
                 path("r")}),
            kOk);
  const auto lines = read_lines(path("r/reliability.csv"));
  EXPECT_EQ(lines[0], kReliabilityHeader);
  std::size_t none = 0, beta = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = fields(lines[i]);
    ASSERT_EQ(f.size(), 6u);
    (f[0] == "none" ? none : beta) += 1;
    EXPECT_LT(std::stoul(f[2]), 8u);
  }
  EXPECT_GT(none, 0u);
  EXPECT_LE(none, 128u);
  EXPECT_LE(beta, 128u);
}

TEST_F(Cli, ReliabilityBinsFlag) {
  const auto data = toy();
  EXPECT_EQ(cli({"reliability", "--dataset", data, "--method", "none", "--bins", "4", "--repeats", "1", "--out",
                 path("r")}),
            kOk);
  const auto lines = read_lines(path("r/reliability.csv"));
  std::size_t max_bin = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) max_bin = std::max<std::size_t>(max_bin, std::stoul(fields(lines[i])[2]));
  EXPECT_EQ(max_bin, 3u);
}

// Noise drawn from the very Gaussian a large-sample OLS fit recovers.
TEST_F(Cli, CalibratedInputStaysOnDiagonal) {
  Rng rng(17);
  {
    std::ofstream csv(path("cal.csv"));
    csv << "x,y\n";
    csv.precision(17);
    for (int i = 0; i < 100000; ++i) {
      const double x = rng.uniform(0, 2);
      csv << x << ',' << 2 * x + rng.normal(0, 0.5) << '\n';
    }
  }
  EXPECT_EQ(cli({"reliability", "--dataset", path("cal.csv"), "--method", "none", "--repeats", "1", "--out",
                 path("r")}),
            kOk)
      << err_.str();
  const auto lines = read_lines(path("r/reliability.csv"));
  ASSERT_GT(lines.size(), 1u);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = fields(lines[i]);
    EXPECT_NEAR(std::stod(f[3]), std::stod(f[4]), 0.03) << lines[i];
  }
}

TEST(PoolReliability, MergesCountWeighted) {
  ReliabilityLine a, b;
  a.threshold = 1.0;
  a.bins = {{0.1, 0.0, 1}, {}};
  b.threshold = 3.0;
  b.bins = {{0.3, 1.0, 3}, {0.9, 1.0, 2}};
  const auto pooled = pool_reliability({{a}, {b}});
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_DOUBLE_EQ(pooled[0].threshold, 2.0);
  EXPECT_EQ(pooled[0].bins[0].count, 4u);
  EXPECT_NEAR(*pooled[0].bins[0].mean_predicted, 0.25, 1e-15);
  EXPECT_NEAR(*pooled[0].bins[0].empirical_frequency, 0.75, 1e-15);
  EXPECT_EQ(pooled[0].bins[1].count, 2u);
}

TEST_F(Cli, RegistryRootFromEnvironment) {
  const fs::path root = dir_ / "root";
  fs::create_directories(root);
  Dataset d = generate_toy({.n = 60});
  write_csv(root / "toy60.tsv", d);
  std::ofstream(path("registry.json"))
      << R"({"datasets": [{"name": "toy60", "file": "toy60.tsv", "target": "y", "delimiter": ",", "header": true}]})";
  ::setenv("REGCAL_DATA_DIR", root.c_str(), 1);
  const int code = cli({"run", "--registry", path("registry.json"), "--dataset", "toy60", "--repeats", "1",
                        "--method", "none", "--out", path("o")});
  ::unsetenv("REGCAL_DATA_DIR");
  EXPECT_EQ(code, kOk) << err_.str();
  const json summary = json::parse(slurp(path("o/summary.json")));
  EXPECT_EQ(summary["n_instances"], 60);
  EXPECT_EQ(cli({"run", "--registry", path("registry.json"), "--dataset", "toy60", "--repeats", "1"}), kIoFailure);
}

TEST_F(Cli, HelpDocumentsColumns) {
  EXPECT_EQ(cli({"run", "--help"}), kOk);
  EXPECT_NE(out_.str().find(std::string(kResultsHeader)), std::string::npos);
  EXPECT_EQ(cli({"--version"}), kOk);
}

}  // namespace
}  // namespace regcal::cli
