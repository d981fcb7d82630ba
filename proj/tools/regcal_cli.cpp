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

#include "regcal_cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "regcal/data.hpp"
#include "regcal/error.hpp"

#ifndef REGCAL_VERSION
#define REGCAL_VERSION "unknown"
#endif

namespace regcal::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw Error(ErrorKind::ConfigError,
              fmt::format("{}: '{}' is not {}", key, value, expected));
}

template <class T>
T parse_unsigned(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc{} || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  finish_output(out, path);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

json config_json(const ExperimentConfig& config) {
  json j = json::object();
  for (const auto& [k, v] : config_entries(config)) j[k] = v;
  return j;
}

json manifest_base(std::string_view command, const std::string& started) {
  return {{"version", REGCAL_VERSION}, {"command", command}, {"started_at", started}};
}

json fold_status(const FoldResult& r) {
  json j = {{"repeat", r.repeat_index}, {"fold", r.fold_index}, {"status", r.ok() ? "ok" : "failed"}};
  if (!r.ok()) j["error"] = r.error;
  return j;
}

json aggregate_json(const Aggregate& a) {
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"completed", a.completed},
          {"failed", a.failed},
          {"mean_log_likelihood", num(a.mean_log_likelihood)},
          {"std_log_likelihood", num(a.std_log_likelihood)},
          {"mean_calibration_deviation", num(a.mean_calibration_deviation)},
          {"std_calibration_deviation", num(a.std_calibration_deviation)}};
}

std::string optional_cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : ""; }

int exit_code_for(ErrorKind kind) {
  return kind == ErrorKind::FileNotFound || kind == ErrorKind::IoError ? kIoFailure : kUsage;
}

// Options shared by run, sweep and reliability.
struct ExperimentFlags {
  std::optional<std::string> config_file;
  std::optional<std::string> registry;
  std::string out_dir = ".";
  bool print_config = false;
  ConfigEntries overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file; flags override its values");
    app->add_option("--registry", registry, "JSON dataset registry (default: built-in UCI entries)");
    app->add_option("--out", out_dir, "output directory")->capture_default_str();
    app->add_flag("--print-config", print_config, "print the resolved config and exit");
    const std::pair<const char*, const char*> keys[] = {
        {"dataset", "toy, a registry name or a CSV path (last column is the target)"},
        {"base", "ols | brr | gpr"},
        {"method", "none | e-logistic | e-beta | gpc"},
        {"train_thresholds", "training threshold count K"},
        {"predict_thresholds", "GPC prediction grid size"},
        {"repeats", "cross-validation repeats"},
        {"folds", "folds per repeat"},
        {"seed", "root seed"},
        {"gpc_cap", "GPC training subsample cap"},
        {"ensemble", "density | cdf"},
        {"reliability_bins", "bins per reliability line"},
        {"jobs", "folds run concurrently"},
    };
    for (const auto& [key, help] : keys) {
      std::string flag = "--" + std::string(key);
      std::replace(flag.begin(), flag.end(), '_', '-');
      const std::string k = key;
      app->add_option_function<std::string>(
          flag, [this, k](const std::string& v) { overrides.emplace_back(k, v); }, help);
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig config;
    if (config_file) config = load_config_file(*config_file);
    for (const auto& [k, v] : overrides) set_config_value(config, k, v);
    config.validate();
    return config;
  }

  Dataset dataset(const ExperimentConfig& config) const {
    const auto entries = registry ? load_registry(*registry) : default_registry();
    return resolve_dataset(config.dataset, entries, data_root());
  }
};

std::vector<Method> parse_methods(const std::optional<std::string>& list, Method fallback) {
  if (!list) return {fallback};
  std::vector<Method> out;
  for (const auto& m : split_list(*list)) out.push_back(parse_method(m));
  if (out.empty()) throw Error(ErrorKind::ConfigError, "methods: list is empty");
  return out;
}

std::vector<std::size_t> parse_sweep(const std::string& list) {
  std::vector<std::size_t> out;
  for (const auto& k : split_list(list)) out.push_back(parse_unsigned<std::size_t>("sweep", k));
  if (out.empty()) throw Error(ErrorKind::ConfigError, "sweep: list is empty");
  return out;
}

int cmd_generate_toy(const ToyParams& params, const fs::path& out_path, std::ostream& out) {
  const std::string started = timestamp();
  const Dataset data = generate_toy(params);
  if (out_path.has_parent_path()) ensure_directory(out_path.parent_path());
  write_csv(out_path, data);
  const fs::path sidecar = out_path.string() + ".manifest.json";
  json manifest = manifest_base("generate-toy", started);
  manifest["params"] = {{"n", params.n},
                        {"slope", params.slope},
                        {"flat_level", params.flat_level},
                        {"noise_std", params.noise_std},
                        {"mix", params.mix},
                        {"feature_low", params.feature_low},
                        {"feature_high", params.feature_high},
                        {"seed", params.seed}};
  manifest["outputs"] = {out_path.string(), sidecar.string()};
  write_json(sidecar, manifest);
  out << fmt::format("wrote {} rows to {}\n", data.size(), out_path.string());
  return kOk;
}

int cmd_run(const ExperimentFlags& flags, std::ostream& out) {
  const ExperimentConfig config = flags.resolve();
  if (flags.print_config) {
    out << format_config(config);
    return kOk;
  }
  const std::string started = timestamp();
  const Dataset data = flags.dataset(config);
  const ExperimentResult result = run_experiment(config, data);

  const fs::path dir = flags.out_dir;
  ensure_directory(dir);
  const fs::path results_path = dir / "results.csv";
  const fs::path summary_path = dir / "summary.json";
  const fs::path manifest_path = dir / "manifest.json";

  auto csv = open_output(results_path);
  csv << kResultsHeader << '\n';
  for (const auto& r : result.folds) csv << format_result_row(r, config) << '\n';
  finish_output(csv, results_path);

  json summary = aggregate_json(result.summary);
  summary["config"] = config_json(config);
  summary["n_instances"] = data.size();
  write_json(summary_path, summary);

  json manifest = manifest_base("run", started);
  manifest["config"] = config_json(config);
  manifest["outputs"] = {results_path.string(), summary_path.string(), manifest_path.string()};
  manifest["folds"] = json::array();
  for (const auto& r : result.folds) manifest["folds"].push_back(fold_status(r));
  write_json(manifest_path, manifest);

  const auto& s = result.summary;
  out << fmt::format("{} {} on {}: {}/{} folds, mean log-likelihood {:.4f} (sd {:.4f}), deviation {:.4f}\n",
                     to_string(config.method), to_string(config.base), config.dataset, s.completed,
                     s.completed + s.failed, s.mean_log_likelihood, s.std_log_likelihood,
                     s.mean_calibration_deviation);
  return s.failed > 0 ? kPartialFailure : kOk;
}

int cmd_sweep(const ExperimentFlags& flags, const std::optional<std::string>& methods_list,
              const std::string& sweep_list, std::ostream& out) {
  const ExperimentConfig base_config = flags.resolve();
  const auto methods = parse_methods(methods_list, base_config.method);
  const auto sweep = parse_sweep(sweep_list);
  for (std::size_t k : sweep) {
    ExperimentConfig c = base_config;
    c.train_thresholds = k;
    c.validate();
  }
  if (flags.print_config) {
    out << format_config(base_config);
    return kOk;
  }
  const std::string started = timestamp();
  const Dataset data = flags.dataset(base_config);

  const fs::path dir = flags.out_dir;
  ensure_directory(dir);
  const fs::path results_path = dir / "sweep_results.csv";
  const fs::path summary_path = dir / "sweep_summary.csv";
  const fs::path manifest_path = dir / "manifest.json";

  auto results = open_output(results_path);
  auto summary = open_output(summary_path);
  results << kResultsHeader << '\n';
  summary << kSweepSummaryHeader << '\n';
  json folds = json::array();
  std::size_t failed = 0;
  for (Method m : methods) {
    for (std::size_t k : sweep) {
      ExperimentConfig c = base_config;
      c.method = m;
      c.train_thresholds = k;
      const ExperimentResult r = run_experiment(c, data);
      for (const auto& f : r.folds) {
        results << format_result_row(f, c) << '\n';
        json status = fold_status(f);
        status["method"] = to_string(m);
        status["K_train"] = k;
        folds.push_back(std::move(status));
      }
      const auto& a = r.summary;
      failed += a.failed;
      summary << fmt::format("{},{},{},{},{},{},{},{},{}\n", to_string(m), to_string(c.base), k, a.completed,
                             a.failed, a.mean_log_likelihood, a.std_log_likelihood,
                             a.mean_calibration_deviation, a.std_calibration_deviation);
      out << fmt::format("{} K={}: mean log-likelihood {:.4f}, deviation {:.4f}\n", to_string(m), k,
                         a.mean_log_likelihood, a.mean_calibration_deviation);
    }
  }
  finish_output(results, results_path);
  finish_output(summary, summary_path);

  json manifest = manifest_base("sweep", started);
  manifest["config"] = config_json(base_config);
  manifest["methods"] = json::array();
  for (Method m : methods) manifest["methods"].push_back(to_string(m));
  manifest["sweep"] = sweep;
  manifest["outputs"] = {results_path.string(), summary_path.string(), manifest_path.string()};
  manifest["folds"] = std::move(folds);
  write_json(manifest_path, manifest);
  return failed > 0 ? kPartialFailure : kOk;
}

int cmd_reliability(const ExperimentFlags& flags, const std::optional<std::string>& methods_list,
                    std::ostream& out) {
  const ExperimentConfig base_config = flags.resolve();
  const auto methods = parse_methods(methods_list, base_config.method);
  if (flags.print_config) {
    out << format_config(base_config);
    return kOk;
  }
  const std::string started = timestamp();
  const Dataset data = flags.dataset(base_config);

  const fs::path dir = flags.out_dir;
  ensure_directory(dir);
  const fs::path csv_path = dir / "reliability.csv";
  const fs::path manifest_path = dir / "manifest.json";
  auto csv = open_output(csv_path);
  csv << kReliabilityHeader << '\n';
  json folds = json::array();
  std::size_t failed = 0;
  for (Method m : methods) {
    ExperimentConfig c = base_config;
    c.method = m;
    std::vector<FoldDetail> details;
    const ExperimentResult r = run_experiment(c, data, &details);
    std::vector<std::vector<ReliabilityLine>> per_fold;
    for (std::size_t u = 0; u < r.folds.size(); ++u) {
      json status = fold_status(r.folds[u]);
      status["method"] = to_string(m);
      folds.push_back(std::move(status));
      if (!r.folds[u].ok()) {
        ++failed;
        continue;
      }
      auto lines = details[u].reliability;
      const auto& st = details[u].standardizer;
      for (auto& line : lines) line.threshold = line.threshold * st.target_scale() + st.target_mean();
      per_fold.push_back(std::move(lines));
    }
    std::size_t rows = 0;
    for (const auto& line : pool_reliability(per_fold)) {
      for (std::size_t b = 0; b < line.bins.size(); ++b) {
        const auto& bin = line.bins[b];
        if (bin.count == 0) continue;
        csv << fmt::format("{},{},{},{},{},{}\n", to_string(m), line.threshold, b,
                           optional_cell(bin.mean_predicted), optional_cell(bin.empirical_frequency), bin.count);
        ++rows;
      }
    }
    out << fmt::format("{}: {} reliability rows\n", to_string(m), rows);
  }
  finish_output(csv, csv_path);

  json manifest = manifest_base("reliability", started);
  manifest["config"] = config_json(base_config);
  manifest["outputs"] = {csv_path.string(), manifest_path.string()};
  manifest["folds"] = std::move(folds);
  write_json(manifest_path, manifest);
  return failed > 0 ? kPartialFailure : kOk;
}

constexpr const char* kRunFooter = R"(Outputs in --out:
  results.csv   one row per (repeat, fold), columns
                repeat,fold,method,base,K_train,mean_log_likelihood,calibration_deviation,wall_time
                (log-likelihood in nats per instance on the original target scale, wall_time in
                seconds; failed folds carry nan)
  summary.json  completed, failed, mean/std of log-likelihood and calibration deviation, config
  manifest.json version, start time, config snapshot, output paths, per-fold status
Exit codes: 0 success, 1 usage or config error, 2 some folds failed, 3 I/O failure.)";

constexpr const char* kSweepFooter = R"(Outputs in --out:
  sweep_results.csv  results.csv rows for every (method, K_train)
  sweep_summary.csv  method,base,K_train,completed,failed,mean_log_likelihood,std_log_likelihood,
                     mean_calibration_deviation,std_calibration_deviation
  manifest.json
Exit codes: 0 success, 1 usage or config error, 2 some folds failed, 3 I/O failure.)";

constexpr const char* kReliabilityFooter = R"(Outputs in --out:
  reliability.csv  method,threshold,bin,mean_predicted,empirical_frequency,count
                   one block per training threshold, pooled over folds; threshold is the
                   fold-averaged value in target units; empty bins are omitted
  manifest.json
Exit codes: 0 success, 1 usage or config error, 2 some folds failed, 3 I/O failure.)";

}  // namespace

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  const auto count = [&] { return parse_unsigned<std::size_t>(key, value); };
  if (key == "dataset") {
    if (value.empty()) bad_value(key, value, "a dataset name");
    config.dataset = std::string(value);
  } else if (key == "base") {
    config.base = parse_base(value);
  } else if (key == "method") {
    config.method = parse_method(value);
  } else if (key == "ensemble") {
    config.ensemble = parse_ensemble(value);
  } else if (key == "train_thresholds") {
    config.train_thresholds = count();
  } else if (key == "predict_thresholds") {
    config.predict_thresholds = count();
  } else if (key == "repeats") {
    config.repeats = count();
  } else if (key == "folds") {
    config.folds = count();
  } else if (key == "seed") {
    config.seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "gpc_cap") {
    config.gpc_cap = count();
  } else if (key == "reliability_bins") {
    config.reliability_bins = count();
  } else if (key == "jobs") {
    config.jobs = count();
  } else {
    throw Error(ErrorKind::ConfigError, fmt::format("unknown config key '{}'", key));
  }
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig config) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, fmt::format("line {}: expected key=value", line_no));
    }
    set_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return config;
}

ExperimentConfig load_config_file(const fs::path& path, ExperimentConfig config) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(config));
}

ConfigEntries config_entries(const ExperimentConfig& c) {
  return {{"dataset", c.dataset},
          {"base", std::string(to_string(c.base))},
          {"method", std::string(to_string(c.method))},
          {"train_thresholds", std::to_string(c.train_thresholds)},
          {"predict_thresholds", std::to_string(c.predict_thresholds)},
          {"repeats", std::to_string(c.repeats)},
          {"folds", std::to_string(c.folds)},
          {"seed", std::to_string(c.seed)},
          {"gpc_cap", std::to_string(c.gpc_cap)},
          {"ensemble", std::string(to_string(c.ensemble))},
          {"reliability_bins", std::to_string(c.reliability_bins)},
          {"jobs", std::to_string(c.jobs)}};
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + "=" + v + "\n";
  return out;
}

std::string format_result_row(const FoldResult& r, const ExperimentConfig& config) {
  return fmt::format("{},{},{},{},{},{},{},{}", r.repeat_index, r.fold_index, to_string(config.method),
                     to_string(config.base), config.train_thresholds, r.mean_log_likelihood,
                     r.calibration_deviation, r.wall_time_seconds);
}

std::vector<ReliabilityLine> pool_reliability(const std::vector<std::vector<ReliabilityLine>>& per_fold) {
  std::size_t lines = 0;
  for (const auto& f : per_fold) lines = std::max(lines, f.size());
  std::vector<ReliabilityLine> out(lines);
  for (std::size_t i = 0; i < lines; ++i) {
    double threshold_sum = 0.0;
    std::size_t folds = 0;
    std::vector<double> pred, freq;
    std::vector<std::size_t> count;
    for (const auto& f : per_fold) {
      if (i >= f.size()) continue;
      const auto& line = f[i];
      threshold_sum += line.threshold;
      ++folds;
      if (pred.size() < line.bins.size()) {
        pred.resize(line.bins.size(), 0.0);
        freq.resize(line.bins.size(), 0.0);
        count.resize(line.bins.size(), 0);
      }
      for (std::size_t b = 0; b < line.bins.size(); ++b) {
        const auto& bin = line.bins[b];
        if (bin.count == 0) continue;
        const double n = static_cast<double>(bin.count);
        pred[b] += n * bin.mean_predicted.value_or(0.0);
        freq[b] += n * bin.empirical_frequency.value_or(0.0);
        count[b] += bin.count;
      }
    }
    out[i].threshold = threshold_sum / static_cast<double>(folds);
    out[i].bins.resize(pred.size());
    for (std::size_t b = 0; b < pred.size(); ++b) {
      auto& bin = out[i].bins[b];
      bin.count = count[b];
      if (count[b] == 0) continue;
      bin.mean_predicted = pred[b] / static_cast<double>(count[b]);
      bin.empirical_frequency = freq[b] / static_cast<double>(count[b]);
    }
  }
  return out;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-hoc calibration of Gaussian regression predictions", "regcal"};
  app.set_version_flag("--version", REGCAL_VERSION);
  app.require_subcommand(1);

  ToyParams toy;
  std::string toy_out;
  auto* gen = app.add_subcommand("generate-toy", "write the two-branch toy dataset as CSV with header x,y");
  gen->add_option("--n", toy.n, "rows")->capture_default_str();
  gen->add_option("--seed", toy.seed, "seed")->capture_default_str();
  gen->add_option("--slope", toy.slope, "slope of the ascending branch")->capture_default_str();
  gen->add_option("--flat-level", toy.flat_level, "level of the flat branch")->capture_default_str();
  gen->add_option("--noise-std", toy.noise_std, "noise standard deviation (> 0)")->capture_default_str();
  gen->add_option("--mix", toy.mix, "probability of the ascending branch")->capture_default_str();
  gen->add_option("--feature-low", toy.feature_low, "feature lower bound")->capture_default_str();
  gen->add_option("--feature-high", toy.feature_high, "feature upper bound")->capture_default_str();
  gen->add_option("--out", toy_out, "output CSV; params go to <out>.manifest.json")->required();

  ExperimentFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "cross-validated experiment for one method");
  run_flags.attach(run_cmd);
  run_cmd->footer(kRunFooter);

  ExperimentFlags sweep_flags;
  std::optional<std::string> sweep_methods;
  std::string sweep_list = "8,16,32,48,64";
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat the experiment over training threshold counts");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--sweep", sweep_list, "comma-separated K_train values")->capture_default_str();
  sweep_cmd->add_option("--methods", sweep_methods, "comma-separated methods (default: --method)");
  sweep_cmd->footer(kSweepFooter);

  ExperimentFlags rel_flags;
  std::optional<std::string> rel_methods;
  auto* rel_cmd = app.add_subcommand("reliability", "reliability diagram data per training threshold");
  rel_flags.attach(rel_cmd);
  rel_cmd->add_option_function<std::string>(
      "--bins", [&](const std::string& v) { rel_flags.overrides.emplace_back("reliability_bins", v); },
      "bins per line (same as --reliability-bins)");
  rel_cmd->add_option("--methods", rel_methods, "comma-separated methods (default: --method)");
  rel_cmd->footer(kReliabilityFooter);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate_toy(toy, toy_out, out);
    if (run_cmd->parsed()) return cmd_run(run_flags, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_methods, sweep_list, out);
    return cmd_reliability(rel_flags, rel_methods, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace regcal::cli
