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

#include "regcal/binary_calibrators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "regcal/distributions.hpp"
#include "regcal/error.hpp"

namespace regcal {

namespace {

void check_lengths(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "scores and labels differ in length");
  }
  if (scores.empty()) throw Error(ErrorKind::EmptyInput, "calibrator fit needs data");
}

bool single_class(std::span<const Label> labels) {
  const auto pos = std::count_if(labels.begin(), labels.end(), [](Label l) { return l != 0; });
  return pos == 0 || static_cast<std::size_t>(pos) == labels.size();
}

double clamp_score(double s) { return std::clamp(s, kCdfClamp, 1.0 - kCdfClamp); }

Vector fit_design(const Matrix& design, std::span<const Label> labels) {
  const SecondOrderFunction nll = [&](const Vector& w, Vector* g, Matrix* h) {
    return logistic_nll(design, labels, w, g, h);
  };
  NewtonOptions options;
  options.tolerance = 1e-10;
  options.max_iterations = 100;
  return newton_minimize(nll, Vector::Zero(design.cols()), options).solution;
}

}  // namespace

double apply_logistic(const LogisticCalibrator& c, double s) { return sigmoid(c.gamma * s + c.delta); }

double apply_beta(const BetaCalibrator& c, double s) {
  const double x = clamp_score(s);
  return sigmoid(c.m + c.a * std::log(x) - c.b * std::log1p(-x));
}

double apply(const BinaryCalibrator& c, double s) {
  return std::visit(
      [s](const auto& cal) {
        using T = std::decay_t<decltype(cal)>;
        if constexpr (std::is_same_v<T, LogisticCalibrator>) {
          return apply_logistic(cal, s);
        } else {
          return apply_beta(cal, s);
        }
      },
      c);
}

double smoothed_positive_rate(std::span<const Label> labels) {
  const auto pos = std::count_if(labels.begin(), labels.end(), [](Label l) { return l != 0; });
  return (static_cast<double>(pos) + 1.0) / (static_cast<double>(labels.size()) + 2.0);
}

double logistic_nll(const Matrix& design, std::span<const Label> labels, const Vector& w,
                    Vector* gradient, Matrix* hessian) {
  const Index n = design.rows();
  const Vector eta = design * w;
  double value = 0.0;
  Vector residual(n);
  Vector weight(n);
  for (Index i = 0; i < n; ++i) {
    const double label = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;
    value += softplus(eta[i]) - label * eta[i];
    const double p = sigmoid(eta[i]);
    residual[i] = p - label;
    weight[i] = p * (1.0 - p);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (gradient != nullptr) *gradient = inv_n * (design.transpose() * residual);
  if (hessian != nullptr) {
    *hessian = inv_n * (design.transpose() * weight.asDiagonal() * design);
  }
  return value * inv_n;
}

LogisticCalibrator fit_logistic(std::span<const double> scores, std::span<const Label> labels) {
  check_lengths(scores, labels);
  if (single_class(labels)) return {0.0, logit(smoothed_positive_rate(labels))};

  const Index n = static_cast<Index>(scores.size());
  Matrix design(n, 2);
  for (Index i = 0; i < n; ++i) {
    design(i, 0) = scores[static_cast<std::size_t>(i)];
    design(i, 1) = 1.0;
  }
  const Vector w = fit_design(design, labels);
  return {w[0], w[1]};
}

BetaCalibrator fit_beta(std::span<const double> scores, std::span<const Label> labels) {
  check_lengths(scores, labels);
  const double rate = smoothed_positive_rate(labels);
  if (single_class(labels)) return {1.0, 1.0, logit(rate)};

  const Index n = static_cast<Index>(scores.size());
  std::vector<double> clamped(scores.size());
  std::transform(scores.begin(), scores.end(), clamped.begin(), clamp_score);
  const auto [lo, hi] = std::minmax_element(clamped.begin(), clamped.end());
  if (*hi - *lo <= 1e-12) return {0.0, 0.0, logit(rate)};

  Matrix full(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double s = clamped[static_cast<std::size_t>(i)];
    full(i, 0) = std::log(s);
    full(i, 1) = -std::log1p(-s);
    full(i, 2) = 1.0;
  }
  Vector w = fit_design(full, labels);
  if (w[0] >= 0.0 && w[1] >= 0.0) return {w[0], w[1], w[2]};

  // Drop the offending feature and refit with the other one.
  const Index keep = w[0] < 0.0 ? 1 : 0;
  Matrix reduced(n, 2);
  reduced.col(0) = full.col(keep);
  reduced.col(1).setOnes();
  w = fit_design(reduced, labels);
  if (w[0] < 0.0) {
    Matrix intercept = Matrix::Ones(n, 1);
    const Vector m = fit_design(intercept, labels);
    return {0.0, 0.0, m[0]};
  }
  BetaCalibrator c{0.0, 0.0, w[1]};
  (keep == 0 ? c.a : c.b) = w[0];
  return c;
}

}  // namespace regcal
