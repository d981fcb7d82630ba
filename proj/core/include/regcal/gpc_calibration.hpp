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
#include <span>
#include <vector>

#include "regcal/binary_calibrators.hpp"
#include "regcal/distributions.hpp"
#include "regcal/numerics.hpp"

namespace regcal {

/// Affine map applied to thresholds before they enter the classifier.
struct TargetScaling {
  double center = 0.0;
  double scale = 1.0;

  double apply(double t) const noexcept { return (t - center) / scale; }
};

/// Mean and (population) standard deviation of the grid's thresholds.
TargetScaling scaling_for(const ThresholdGrid& grid);

/// Rows are (q(t), standardized t) with label 1 when y <= t.
struct GpcTrainingSet {
  Matrix features;
  std::vector<Label> labels;
  std::size_t subsample_cap = 5000;
  TargetScaling scaling;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Forms every (instance, threshold) pair; when there are more than `cap`
/// pairs a seeded uniform subsample without replacement is kept.
GpcTrainingSet build_gpc_training(std::span<const CdfGrid> predicted_cdfs,
                                  std::span<const double> targets, const ThresholdGrid& grid,
                                  std::size_t cap, std::uint64_t seed);

/// RBF kernel with one length-scale per feature (q, t).
struct GpcKernel {
  double variance = 1.0;
  Vector length_scales = Vector::Ones(2);

  Vector log_params() const;
  static GpcKernel from_log_params(const Vector& p);
  Matrix operator()(const Matrix& a, const Matrix& b) const;
};

struct LaplaceOptions {
  double tolerance = 1e-6;
  int max_iterations = 100;
};

/// Laplace approximation of the latent posterior for a logistic link.
struct LaplaceState {
  Vector mode;          // f
  Vector a;             // K^{-1} f
  Vector grad_loglik;   // d log p(b | f) / df at the mode
  Vector w_sqrt;        // sqrt(-d^2 log p(b | f) / df^2)
  Matrix chol_b;        // lower triangle: factor of I + W^1/2 K W^1/2
  double log_marginal = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton iteration on log p(b | f) - f^T K^{-1} f / 2 in the B-matrix
/// form, with step halving whenever the objective would drop. `k` must be
/// symmetric positive semi-definite. `warm_a` seeds f = K a.
LaplaceState laplace_mode(const Matrix& k, std::span<const Label> labels,
                          const LaplaceOptions& options = {}, const Vector* warm_a = nullptr);

/// Laplace-approximate log marginal likelihood at log kernel parameters
/// (log variance, log l_q, log l_t), with its gradient on request.
/// `warm_a` (in/out) carries the mode between calls.
double gpc_log_marginal(const GpcTrainingSet& training, const Vector& log_params,
                        Vector* gradient = nullptr, const LaplaceOptions& options = {},
                        Vector* warm_a = nullptr);

struct GpcModel {
  GpcTrainingSet training;
  GpcKernel kernel;
  LaplaceState posterior;
};

struct GpcFitOptions {
  int restarts = 2;
  int max_iterations = 50;
  double gradient_tolerance = 1e-3;
  std::uint64_t seed = 0;
  LaplaceOptions laplace;
};

/// Posterior at fixed kernel parameters; an empty training set gives the
/// prior.
GpcModel condition_gpc(GpcTrainingSet training, const GpcKernel& kernel,
                       const LaplaceOptions& options = {});

/// Maximizes the approximate log marginal likelihood in log-space. The first
/// start is variance 1, length-scales 1; further restarts draw each
/// parameter log-uniformly from [0.1, 10].
GpcModel fit_gpc(GpcTrainingSet training, const GpcFitOptions& options = {});

struct LatentMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Predictive latent mean/variance at rows (q, standardized t).
std::vector<LatentMoments> predict_latent(const GpcModel& model, const Matrix& points);

/// E[sigmoid(f)] for f ~ N(mean, variance), using a five-term probit
/// mixture for the sigmoid (max abs error below 1e-4).
double predictive_probability(double mean, double variance);

/// Calibrated P(Y <= t) at each threshold of `q_test`'s grid, projected to a
/// valid CDF.
CdfGrid predict_gpc_cdf(const GpcModel& model, const CdfGrid& q_test);
/// Batched form; all inputs must share one grid.
std::vector<CdfGrid> predict_gpc_cdfs(const GpcModel& model, std::span<const CdfGrid> q_test);

PiecewiseDensity predict_gpc_density(const GpcModel& model, const CdfGrid& q_test);

}  // namespace regcal
