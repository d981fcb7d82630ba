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

#include "regcal/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "regcal/error.hpp"

namespace regcal {

namespace {

ScoreReport finish(std::vector<double> values, std::size_t floored) {
  ScoreReport r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean_log_likelihood = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
  r.per_instance_log_densities = std::move(values);
  r.n_floored = floored;
  return r;
}

}  // namespace

std::size_t reliability_bin(double p, std::size_t n_bins) {
  const double scaled = std::ceil(std::clamp(p, 0.0, 1.0) * static_cast<double>(n_bins));
  const auto idx = scaled < 1.0 ? std::size_t{0} : static_cast<std::size_t>(scaled) - 1;
  return std::min(idx, n_bins - 1);
}

ReliabilityLine reliability_line(std::span<const double> predicted, std::span<const Label> outcomes,
                                 std::size_t n_bins, double threshold) {
  if (predicted.size() != outcomes.size()) {
    throw Error(ErrorKind::LengthMismatch, "predictions and outcomes differ in length");
  }
  if (n_bins < 1) throw Error(ErrorKind::InvalidArgument, "n_bins must be >= 1");
  std::vector<double> sum_p(n_bins, 0.0);
  std::vector<double> sum_y(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const std::size_t b = reliability_bin(predicted[i], n_bins);
    sum_p[b] += predicted[i];
    sum_y[b] += outcomes[i] != 0 ? 1.0 : 0.0;
    ++count[b];
  }
  ReliabilityLine line;
  line.threshold = threshold;
  line.bins.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    line.bins[b].count = count[b];
    if (count[b] > 0) {
      const auto n = static_cast<double>(count[b]);
      line.bins[b].mean_predicted = sum_p[b] / n;
      line.bins[b].empirical_frequency = sum_y[b] / n;
    }
  }
  return line;
}

double calibration_deviation(std::span<const ReliabilityLine> lines) {
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& line : lines) {
    for (const auto& bin : line.bins) {
      if (bin.count == 0) continue;
      const auto n = static_cast<double>(bin.count);
      weighted += n * std::abs(*bin.mean_predicted - *bin.empirical_frequency);
      total += n;
    }
  }
  return total > 0.0 ? weighted / total : 0.0;
}

ScoreReport log_likelihood(std::span<const PiecewiseDensity> densities,
                           std::span<const double> targets, double target_scale) {
  if (densities.size() != targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "one density per target is required");
  }
  if (!(target_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "target_scale must be positive");
  const double shift = std::log(target_scale);
  std::vector<double> values(targets.size());
  std::size_t floored = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = densities[i].density_at(targets[i]);
    if (d <= kDensityFloor) ++floored;
    values[i] = std::log(d) - shift;
  }
  return finish(std::move(values), floored);
}

ScoreReport log_likelihood(std::span<const GaussianPredictive> densities,
                           std::span<const double> targets, double target_scale) {
  if (densities.size() != targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "one density per target is required");
  }
  if (!(target_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "target_scale must be positive");
  const double shift = std::log(target_scale);
  const double floor_log = std::log(kDensityFloor);
  std::vector<double> values(targets.size());
  std::size_t floored = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double v = densities[i].log_pdf(targets[i]);
    if (v <= floor_log) {
      v = floor_log;
      ++floored;
    }
    values[i] = v - shift;
  }
  return finish(std::move(values), floored);
}

}  // namespace regcal
