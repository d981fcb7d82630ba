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

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regcal/base_models.hpp"
#include "regcal/data.hpp"
#include "regcal/distributions.hpp"
#include "regcal/evaluation.hpp"

namespace regcal {

enum class BaseKind { Ols, Brr, Gpr };
enum class Method { None, ELogistic, EBeta, Gpc };
/// How the three calibrated models of a fold are combined.
enum class Ensemble { Density, Cdf };

std::string_view to_string(BaseKind b);
std::string_view to_string(Method m);
std::string_view to_string(Ensemble e);
/// Throw ConfigError on unknown names.
BaseKind parse_base(std::string_view s);
Method parse_method(std::string_view s);
Ensemble parse_ensemble(std::string_view s);

struct ExperimentConfig {
  std::string dataset = "toy";
  BaseKind base = BaseKind::Ols;
  Method method = Method::EBeta;
  std::size_t train_thresholds = 16;
  std::size_t predict_thresholds = 1024;
  std::size_t repeats = 10;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t gpc_cap = 5000;
  Ensemble ensemble = Ensemble::Density;
  std::size_t reliability_bins = 8;
  std::size_t jobs = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct FoldResult {
  std::size_t repeat_index = 0;
  std::size_t fold_index = 0;
  double mean_log_likelihood = 0.0;
  std::size_t n_test = 0;
  std::size_t n_floored = 0;
  double calibration_deviation = 0.0;
  double wall_time_seconds = 0.0;
  /// Empty on success.
  std::string error;

  bool ok() const noexcept { return error.empty(); }
};

/// Test-fold assignments: test[r][f] holds the sorted test indices of
/// fold f in repeat r.
struct CvPlan {
  std::size_t n = 0;
  std::vector<std::vector<std::vector<std::size_t>>> test;

  std::size_t repeats() const noexcept { return test.size(); }
  std::size_t folds() const noexcept { return test.empty() ? 0 : test.front().size(); }
  std::vector<std::size_t> train_indices(std::size_t repeat, std::size_t fold) const;
};

/// Independent seeded shuffle per repeat; fold sizes differ by at most one
/// with the larger folds first.
CvPlan split_cv(std::size_t n, std::size_t folds, std::size_t repeats, std::uint64_t seed);

/// One base/calibration split of a training fold.
struct SubfoldPlan {
  std::vector<std::size_t> base;
  std::vector<std::size_t> calibration;
};

/// Splits `train` into `parts` chunks; entry i calibrates on chunk i and
/// trains the base model on the rest.
std::vector<SubfoldPlan> plan_subfolds(std::span<const std::size_t> train, std::size_t parts,
                                       std::uint64_t seed);

BaseModel fit_base(BaseKind kind, const Matrix& x, const Vector& y, std::uint64_t seed);

/// Column of largest (unstandardized) variance among `rows`.
Index max_variance_feature(const Matrix& x, std::span<const std::size_t> rows);

/// Pointwise average of densities on one grid, renormalized.
PiecewiseDensity average_densities(std::span<const PiecewiseDensity> parts);
/// Average of CDFs on one grid, turned into a density.
PiecewiseDensity average_cdfs(std::span<const CdfGrid> parts);

/// Everything a fold produced, for diagnostics and plots. Densities and
/// thresholds are on the standardized target scale.
struct FoldDetail {
  std::vector<std::size_t> test_indices;
  std::vector<SubfoldPlan> subfolds;
  Standardizer standardizer;
  std::optional<Index> selected_feature;
  GridPtr train_grid;
  /// Calibrated ensemble per test instance; empty for Method::None.
  std::vector<PiecewiseDensity> densities;
  /// Base model fitted on the whole training fold (Method::None only).
  std::vector<GaussianPredictive> gaussians;
  std::vector<ReliabilityLine> reliability;
};

/// Fits and scores one fold. Errors propagate tagged with (repeat, fold).
FoldResult run_fold(const ExperimentConfig& config, const Dataset& data,
                    std::span<const std::size_t> train, std::span<const std::size_t> test,
                    std::size_t repeat_index, std::size_t fold_index, FoldDetail* detail = nullptr);

struct Aggregate {
  std::size_t completed = 0;
  std::size_t failed = 0;
  double mean_log_likelihood = 0.0;
  double std_log_likelihood = 0.0;
  double mean_calibration_deviation = 0.0;
  double std_calibration_deviation = 0.0;
};

/// Mean and sample standard deviation over successful folds.
Aggregate aggregate(std::span<const FoldResult> folds);

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<FoldResult> folds;  // repeat-major
  Aggregate summary;
};

/// Runs every (repeat, fold) of the plan, `config.jobs` at a time. A fold
/// that throws is kept with its error and left out of the aggregate. When
/// `details` is given it receives one entry per fold, repeat-major.
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data,
                                std::vector<FoldDetail>* details = nullptr);

}  // namespace regcal
