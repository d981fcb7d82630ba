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
#include <variant>

#include "regcal/numerics.hpp"

namespace regcal {

using Label = std::uint8_t;

/// c(s) = sigmoid(gamma * s + delta); the score enters on its probability
/// scale, not as log-odds.
struct LogisticCalibrator {
  double gamma = 0.0;
  double delta = 0.0;
};

/// c(s) = sigmoid(m + a ln s - b ln(1 - s)) with a, b >= 0.
struct BetaCalibrator {
  double a = 1.0;
  double b = 1.0;
  double m = 0.0;
};

using BinaryCalibrator = std::variant<LogisticCalibrator, BetaCalibrator>;

double apply_logistic(const LogisticCalibrator& c, double s);
/// Scores are clamped to [1e-12, 1 - 1e-12] before the logs.
double apply_beta(const BetaCalibrator& c, double s);
double apply(const BinaryCalibrator& c, double s);

/// (positives + 1) / (n + 2).
double smoothed_positive_rate(std::span<const Label> labels);

/// Maximum-likelihood logistic calibration (Newton/IRLS). With a single
/// class present the constant calibrator at the smoothed rate is returned.
LogisticCalibrator fit_logistic(std::span<const double> scores, std::span<const Label> labels);

/// Discriminative beta calibration: logistic regression on
/// [ln s, -ln(1 - s)]. A negative coefficient is removed by refitting
/// without that feature, so a, b >= 0 always. A single class yields
/// a = b = 1 with m at the smoothed log-odds; constant scores yield the
/// constant map a = b = 0.
BetaCalibrator fit_beta(std::span<const double> scores, std::span<const Label> labels);

/// Mean Bernoulli negative log-likelihood of sigmoid(design * w), with
/// gradient and Hessian. Shared by both fits and exposed for tests.
double logistic_nll(const Matrix& design, std::span<const Label> labels, const Vector& w,
                    Vector* gradient, Matrix* hessian);

}  // namespace regcal
