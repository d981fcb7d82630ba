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

#include "regcal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <thread>

#include "regcal/empirical_calibration.hpp"
#include "regcal/error.hpp"
#include "regcal/gpc_calibration.hpp"
#include "regcal/rng.hpp"

namespace regcal {

namespace {

Matrix take_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

Vector take_rows(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = v[static_cast<Index>(rows[i])];
  return out;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::vector<CdfGrid> gaussian_cdfs(const GridPtr& grid, std::span<const GaussianPredictive> preds) {
  std::vector<CdfGrid> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(CdfGrid::from_gaussian(grid, p));
  return out;
}

void require_shared_grid(const GridPtr& a, const GridPtr& b) {
  if (!(a == b || *a == *b)) throw Error(ErrorKind::GridMismatch, "ensemble members use different grids");
}

template <typename Predict>
std::vector<ReliabilityLine> reliability_lines(const ThresholdGrid& grid, const Vector& targets,
                                               std::size_t bins, Predict predict) {
  std::vector<ReliabilityLine> lines;
  lines.reserve(grid.size());
  const auto n = static_cast<std::size_t>(targets.size());
  std::vector<double> p(n);
  std::vector<Label> outcome(n);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = predict(i, grid[j]);
      outcome[i] = targets[static_cast<Index>(i)] <= grid[j] ? 1 : 0;
    }
    lines.push_back(reliability_line(p, outcome, bins, grid[j]));
  }
  return lines;
}

FoldResult run_fold_impl(const ExperimentConfig& config, const Dataset& data,
                         std::span<const std::size_t> train, std::span<const std::size_t> test,
                         std::size_t repeat_index, std::size_t fold_index, FoldDetail* detail) {
  if (train.empty() || test.empty()) throw Error(ErrorKind::EmptyInput, "fold has an empty split");
  const std::uint64_t unit = derive_seed(config.seed, {repeat_index, fold_index});

  const Standardizer standardizer =
      Standardizer::fit(take_rows(data.features, train), take_rows(data.targets, train));
  std::optional<Index> feature;
  if (config.base == BaseKind::Gpr && data.features.cols() > 1) {
    feature = max_variance_feature(data.features, train);
  }
  Matrix z = standardizer.transform_features(data.features);
  if (feature) z = Matrix(z.col(*feature));
  const Vector y = standardizer.transform_targets(data.targets);

  const Vector y_train = take_rows(y, train);
  const GridPtr grid = std::make_shared<const ThresholdGrid>(
      build_threshold_grid(y_train.minCoeff(), y_train.maxCoeff(), config.train_thresholds));
  const Matrix z_test = take_rows(z, test);
  const Vector y_test = take_rows(y, test);

  FoldResult result;
  result.repeat_index = repeat_index;
  result.fold_index = fold_index;
  result.n_test = test.size();

  ScoreReport score;
  std::vector<ReliabilityLine> lines;
  std::vector<SubfoldPlan> subfolds;
  std::vector<PiecewiseDensity> ensemble;
  std::vector<GaussianPredictive> gaussians;

  if (config.method == Method::None) {
    const BaseModel model = fit_base(config.base, take_rows(z, train), y_train, derive_seed(unit, {1}));
    gaussians = predict_base(model, z_test);
    score = log_likelihood(std::span<const GaussianPredictive>(gaussians), as_span(y_test),
                           standardizer.target_scale());
    lines = reliability_lines(*grid, y_test, config.reliability_bins,
                              [&](std::size_t i, double t) { return gaussian_cdf(gaussians[i], t); });
  } else {
    subfolds = plan_subfolds(train, 3, derive_seed(unit, {0}));
    const GridPtr predict_grid =
        config.method == Method::Gpc
            ? std::make_shared<const ThresholdGrid>(build_threshold_grid(
                  y_train.minCoeff(), y_train.maxCoeff(), config.predict_thresholds))
            : grid;

    std::vector<std::vector<CdfGrid>> members;
    for (std::size_t s = 0; s < subfolds.size(); ++s) {
      const auto& plan = subfolds[s];
      const BaseModel model = fit_base(config.base, take_rows(z, plan.base), take_rows(y, plan.base),
                                       derive_seed(unit, {1, s}));
      const auto cal_cdfs = gaussian_cdfs(grid, predict_base(model, take_rows(z, plan.calibration)));
      const Vector cal_y = take_rows(y, plan.calibration);
      const auto test_preds = predict_base(model, z_test);
      const auto cal_targets = as_span(cal_y);

      if (config.method == Method::Gpc) {
        GpcTrainingSet training =
            build_gpc_training(cal_cdfs, cal_targets, *grid, config.gpc_cap, derive_seed(unit, {2, s}));
        GpcFitOptions options;
        options.seed = derive_seed(unit, {3, s});
        const GpcModel gpc = fit_gpc(std::move(training), options);
        members.push_back(predict_gpc_cdfs(gpc, gaussian_cdfs(predict_grid, test_preds)));
      } else {
        const auto kind = config.method == Method::ELogistic ? EmpiricalKind::Logistic : EmpiricalKind::Beta;
        const EmpiricalCalibrator cal = fit_empirical(kind, grid, cal_cdfs, cal_targets);
        std::vector<CdfGrid> cdfs;
        cdfs.reserve(test.size());
        for (const auto& q : gaussian_cdfs(grid, test_preds)) cdfs.push_back(empirical_cdf(cal, q));
        members.push_back(std::move(cdfs));
      }
    }

    ensemble.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::vector<CdfGrid> parts;
      for (const auto& m : members) parts.push_back(m[i]);
      if (config.ensemble == Ensemble::Cdf) {
        ensemble.push_back(average_cdfs(parts));
      } else {
        std::vector<PiecewiseDensity> densities;
        for (const auto& c : parts) densities.push_back(cdf_to_density(c));
        ensemble.push_back(average_densities(densities));
      }
    }
    score = log_likelihood(std::span<const PiecewiseDensity>(ensemble), as_span(y_test),
                           standardizer.target_scale());
    lines = reliability_lines(*grid, y_test, config.reliability_bins,
                              [&](std::size_t i, double t) { return ensemble[i].cdf_at(t); });
  }

  result.mean_log_likelihood = score.mean_log_likelihood;
  result.n_floored = score.n_floored;
  result.calibration_deviation = calibration_deviation(lines);

  if (detail != nullptr) {
    detail->test_indices.assign(test.begin(), test.end());
    detail->subfolds = std::move(subfolds);
    detail->standardizer = standardizer;
    detail->selected_feature = feature;
    detail->train_grid = grid;
    detail->densities = std::move(ensemble);
    detail->gaussians = std::move(gaussians);
    detail->reliability = std::move(lines);
  }
  return result;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string_view to_string(BaseKind b) {
  switch (b) {
    case BaseKind::Ols: return "ols";
    case BaseKind::Brr: return "brr";
    case BaseKind::Gpr: return "gpr";
  }
  return "?";
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::None: return "none";
    case Method::ELogistic: return "e-logistic";
    case Method::EBeta: return "e-beta";
    case Method::Gpc: return "gpc";
  }
  return "?";
}

std::string_view to_string(Ensemble e) { return e == Ensemble::Density ? "density" : "cdf"; }

BaseKind parse_base(std::string_view s) {
  for (auto b : {BaseKind::Ols, BaseKind::Brr, BaseKind::Gpr}) {
    if (s == to_string(b)) return b;
  }
  throw Error(ErrorKind::ConfigError, "base must be ols, brr or gpr, got '" + std::string(s) + "'");
}

Method parse_method(std::string_view s) {
  for (auto m : {Method::None, Method::ELogistic, Method::EBeta, Method::Gpc}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorKind::ConfigError,
              "method must be none, e-logistic, e-beta or gpc, got '" + std::string(s) + "'");
}

Ensemble parse_ensemble(std::string_view s) {
  if (s == "density") return Ensemble::Density;
  if (s == "cdf") return Ensemble::Cdf;
  throw Error(ErrorKind::ConfigError, "ensemble must be density or cdf, got '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw Error(ErrorKind::ConfigError, key + ": " + why);
  };
  if (dataset.empty()) fail("dataset", "must not be empty");
  if (folds < 2) fail("folds", "must be >= 2");
  if (repeats < 1) fail("repeats", "must be >= 1");
  if (train_thresholds < 2) fail("train_thresholds", "must be >= 2");
  if (predict_thresholds < train_thresholds) fail("predict_thresholds", "must be >= train_thresholds");
  if (gpc_cap < 1) fail("gpc_cap", "must be >= 1");
  if (reliability_bins < 1) fail("reliability_bins", "must be >= 1");
  if (jobs < 1) fail("jobs", "must be >= 1");
}

std::vector<std::size_t> CvPlan::train_indices(std::size_t repeat, std::size_t fold) const {
  std::vector<bool> in_test(n, false);
  for (std::size_t i : test.at(repeat).at(fold)) in_test[i] = true;
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_test[i]) out.push_back(i);
  }
  return out;
}

CvPlan split_cv(std::size_t n, std::size_t folds, std::size_t repeats, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "folds must be >= 2");
  if (n < folds) {
    throw Error(ErrorKind::TooFewInstances,
                std::to_string(n) + " instances cannot fill " + std::to_string(folds) + " folds");
  }
  CvPlan plan;
  plan.n = n;
  plan.test.resize(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, {r}));
    const auto perm = rng.permutation(n);
    std::size_t offset = 0;
    for (std::size_t f = 0; f < folds; ++f) {
      const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
      std::vector<std::size_t> fold(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                    perm.begin() + static_cast<std::ptrdiff_t>(offset + size));
      std::sort(fold.begin(), fold.end());
      plan.test[r].push_back(std::move(fold));
      offset += size;
    }
  }
  return plan;
}

std::vector<SubfoldPlan> plan_subfolds(std::span<const std::size_t> train, std::size_t parts,
                                       std::uint64_t seed) {
  if (parts < 2) throw Error(ErrorKind::InvalidArgument, "need at least two sub-folds");
  if (train.size() < parts) {
    throw Error(ErrorKind::TooFewInstances, "training fold too small for its sub-folds");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(train.size());
  std::vector<std::size_t> chunk(train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) chunk[perm[i]] = i % parts;

  std::vector<SubfoldPlan> out(parts);
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t p = 0; p < parts; ++p) {
      (chunk[i] == p ? out[p].calibration : out[p].base).push_back(train[i]);
    }
  }
  return out;
}

BaseModel fit_base(BaseKind kind, const Matrix& x, const Vector& y, std::uint64_t seed) {
  switch (kind) {
    case BaseKind::Ols: return fit_ols(x, y);
    case BaseKind::Brr: return fit_brr(x, y);
    case BaseKind::Gpr: {
      GprOptions options;
      options.seed = seed;
      return fit_gpr(x, y, options);
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown base model");
}

Index max_variance_feature(const Matrix& x, std::span<const std::size_t> rows) {
  const Matrix sub = take_rows(x, rows);
  const Vector mean = sub.colwise().mean().transpose();
  Index best = 0;
  double best_var = -1.0;
  for (Index c = 0; c < sub.cols(); ++c) {
    const double var = (sub.col(c).array() - mean[c]).square().sum();
    if (var > best_var) {
      best_var = var;
      best = c;
    }
  }
  return best;
}

PiecewiseDensity average_densities(std::span<const PiecewiseDensity> parts) {
  if (parts.empty()) throw Error(ErrorKind::EmptyInput, "nothing to average");
  const GridPtr& grid = parts.front().grid_ptr();
  std::vector<double> d(parts.front().segment_densities().size(), 0.0);
  double low = 0.0;
  double high = 0.0;
  for (const auto& p : parts) {
    require_shared_grid(grid, p.grid_ptr());
    const auto s = p.segment_densities();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    low += p.tail_mass_low();
    high += p.tail_mass_high();
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (auto& v : d) v *= inv;
  low *= inv;
  high *= inv;

  // Renormalize rounding drift before flooring.
  const auto t = grid->thresholds();
  double mass = low + high;
  for (std::size_t i = 0; i < d.size(); ++i) mass += d[i] * (t[i + 1] - t[i]);
  if (mass > 0.0) {
    for (auto& v : d) v /= mass;
    low /= mass;
    high /= mass;
  }
  return normalize_density(grid, std::move(d), low, high);
}

PiecewiseDensity average_cdfs(std::span<const CdfGrid> parts) {
  if (parts.empty()) throw Error(ErrorKind::EmptyInput, "nothing to average");
  const GridPtr& grid = parts.front().grid_ptr();
  std::vector<double> q(parts.front().size(), 0.0);
  for (const auto& p : parts) {
    require_shared_grid(grid, p.grid_ptr());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += p[i];
  }
  for (auto& v : q) v /= static_cast<double>(parts.size());
  return cdf_to_density(CdfGrid(grid, monotone_project(q)));
}

FoldResult run_fold(const ExperimentConfig& config, const Dataset& data,
                    std::span<const std::size_t> train, std::span<const std::size_t> test,
                    std::size_t repeat_index, std::size_t fold_index, FoldDetail* detail) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  try {
    FoldResult r = run_fold_impl(config, data, train, test, repeat_index, fold_index, detail);
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  } catch (const Error& e) {
    throw Error(e.kind(), "repeat " + std::to_string(repeat_index) + " fold " +
                              std::to_string(fold_index) + ": " + e.what());
  }
}

Aggregate aggregate(std::span<const FoldResult> folds) {
  Aggregate a;
  std::vector<double> ll;
  std::vector<double> dev;
  for (const auto& f : folds) {
    if (!f.ok()) {
      ++a.failed;
      continue;
    }
    ll.push_back(f.mean_log_likelihood);
    dev.push_back(f.calibration_deviation);
  }
  a.completed = ll.size();
  if (ll.empty()) return a;
  for (double v : ll) a.mean_log_likelihood += v;
  for (double v : dev) a.mean_calibration_deviation += v;
  a.mean_log_likelihood /= static_cast<double>(ll.size());
  a.mean_calibration_deviation /= static_cast<double>(dev.size());
  a.std_log_likelihood = sample_std(ll, a.mean_log_likelihood);
  a.std_calibration_deviation = sample_std(dev, a.mean_calibration_deviation);
  return a;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data,
                                std::vector<FoldDetail>* details) {
  config.validate();
  if (data.size() < 10) {
    throw Error(ErrorKind::TooFewInstances, "datasets need at least 10 instances");
  }
  const CvPlan plan = split_cv(data.size(), config.folds, config.repeats, config.seed);
  const std::size_t units = config.repeats * config.folds;

  ExperimentResult out;
  out.config = config;
  out.folds.resize(units);
  if (details != nullptr) details->assign(units, FoldDetail{});
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t u = next++; u < units; u = next++) {
      const std::size_t r = u / config.folds;
      const std::size_t f = u % config.folds;
      const auto& test = plan.test[r][f];
      const auto train = plan.train_indices(r, f);
      const auto start = std::chrono::steady_clock::now();
      try {
        out.folds[u] = run_fold(config, data, train, test, r, f, details ? &(*details)[u] : nullptr);
      } catch (const std::exception& e) {
        FoldResult failed;
        failed.repeat_index = r;
        failed.fold_index = f;
        failed.n_test = test.size();
        failed.mean_log_likelihood = std::nan("");
        failed.calibration_deviation = std::nan("");
        failed.error = e.what();
        failed.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.folds[u] = std::move(failed);
      }
    }
  };

  const std::size_t threads = std::min(config.jobs, units);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  out.summary = aggregate(out.folds);
  return out;
}

}  // namespace regcal
