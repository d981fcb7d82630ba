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
#include <variant>
#include <vector>

#include "regcal/distributions.hpp"
#include "regcal/numerics.hpp"

namespace regcal {

/// Least squares with one residual stddev shared by every prediction.
struct OlsModel {
  Vector weights;
  double intercept = 0.0;
  double residual_std = 1.0;
};

/// Bayesian ridge regression. alpha is the noise precision, lambda the
/// weight precision; posterior_covariance is over the (centered) weights.
struct BrrModel {
  Vector weights;
  double intercept = 0.0;
  double alpha = 1.0;
  double lambda = 1.0;
  Matrix posterior_covariance;
  Vector feature_mean;
  int iterations = 0;
  bool converged = false;
};

struct GprHyperparameters {
  double kernel_variance = 1.0;
  double length_scale = 1.0;
  double noise_variance = 1e-2;
};

/// GP regression with an isotropic RBF kernel plus white noise.
struct GprModel {
  GprHyperparameters hyper;
  Matrix training_inputs;
  double target_mean = 0.0;
  Vector alpha_vector;  // K^{-1} (y - target_mean)
  Matrix chol_factor;   // lower factor of K + noise I
  double log_marginal = 0.0;
};

using BaseModel = std::variant<OlsModel, BrrModel, GprModel>;

OlsModel fit_ols(const Matrix& x, const Vector& y);

struct BrrOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;
  /// Gamma hyperprior shape/rate for alpha and lambda (near-uninformative).
  double alpha_shape = 1e-6;
  double alpha_rate = 1e-6;
  double lambda_shape = 1e-6;
  double lambda_rate = 1e-6;
};

/// Evidence maximization by fixed-point updates from alpha = 1/var(y),
/// lambda = 1. Non-convergence is reported through BrrModel::converged.
BrrModel fit_brr(const Matrix& x, const Vector& y, const BrrOptions& options = {});
/// Weight posterior for fixed precisions.
BrrModel brr_posterior(const Matrix& x, const Vector& y, double alpha, double lambda);

struct GprOptions {
  int restarts = 3;
  std::uint64_t seed = 0;
  int max_iterations = 100;
};

/// Maximizes the log marginal likelihood over (log variance, log length
/// scale, log noise) by gradient ascent; the best of `restarts` log-uniform
/// starts in [1e-2, 1e2] is kept.
GprModel fit_gpr(const Matrix& x, const Vector& y, const GprOptions& options = {});
/// GP posterior at fixed hyperparameters.
GprModel condition_gpr(const Matrix& x, const Vector& y, const GprHyperparameters& hyper);
/// Log marginal likelihood at log hyperparameters; fills the gradient with
/// respect to those log parameters when requested.
double gpr_log_marginal(const Matrix& x, const Vector& y, const Vector& log_params,
                        Vector* gradient = nullptr);

GaussianPredictive predict_base(const BaseModel& model, const Vector& x);
std::vector<GaussianPredictive> predict_base(const BaseModel& model, const Matrix& x);

}  // namespace regcal
