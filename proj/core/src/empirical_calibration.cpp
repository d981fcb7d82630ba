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

#include "regcal/empirical_calibration.hpp"

#include <algorithm>
#include <numeric>

#include "regcal/error.hpp"

namespace regcal {

namespace {

void check_grid(const GridPtr& expected, const CdfGrid& q) {
  if (!(q.grid_ptr() == expected || q.grid() == *expected)) {
    throw Error(ErrorKind::GridMismatch, "cdf is not on the calibrator's grid");
  }
}

}  // namespace

std::vector<double> segment_masses(const CdfGrid& q) {
  const auto v = q.values();
  std::vector<double> p(v.size() + 1);
  p[0] = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) p[i] = v[i] - v[i - 1];
  p[v.size()] = 1.0 - v.back();
  return p;
}

EmpiricalCalibrator fit_empirical(EmpiricalKind kind, GridPtr grid,
                                  std::span<const CdfGrid> predicted_cdfs,
                                  std::span<const double> targets) {
  if (!grid) throw Error(ErrorKind::InvalidArgument, "empirical calibration needs a grid");
  if (predicted_cdfs.size() != targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "one predicted cdf per target is required");
  }
  if (targets.empty()) throw Error(ErrorKind::EmptyInput, "no calibration instances");

  const std::size_t n = targets.size();
  const std::size_t segments = grid->size() + 1;
  // masses[i][k] = mass of instance k on segment i
  std::vector<std::vector<double>> masses(segments, std::vector<double>(n));
  std::vector<std::vector<Label>> labels(segments, std::vector<Label>(n, 0));
  for (std::size_t k = 0; k < n; ++k) {
    check_grid(grid, predicted_cdfs[k]);
    const auto p = segment_masses(predicted_cdfs[k]);
    for (std::size_t i = 0; i < segments; ++i) masses[i][k] = p[i];
    labels[grid->segment_of(targets[k])][k] = 1;
  }

  EmpiricalCalibrator out;
  out.grid = std::move(grid);
  out.kind = kind;
  out.per_segment.reserve(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    if (kind == EmpiricalKind::Logistic) {
      out.per_segment.emplace_back(fit_logistic(masses[i], labels[i]));
    } else {
      out.per_segment.emplace_back(fit_beta(masses[i], labels[i]));
    }
  }
  return out;
}

std::vector<double> calibrate_masses(const EmpiricalCalibrator& c, const CdfGrid& q) {
  check_grid(c.grid, q);
  auto p = segment_masses(q);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::max(apply(c.per_segment[i], p[i]), 0.0);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (auto& v : p) v /= total;
  return p;
}

CdfGrid empirical_cdf(const EmpiricalCalibrator& c, const CdfGrid& q) {
  const auto p = calibrate_masses(c, q);
  std::vector<double> cdf(p.size() - 1);
  double running = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    running += p[i];
    cdf[i] = std::clamp(running, 0.0, 1.0);
  }
  return CdfGrid(c.grid, monotone_project(cdf));
}

PiecewiseDensity empirical_density(const EmpiricalCalibrator& c, const CdfGrid& q) {
  return cdf_to_density(empirical_cdf(c, q));
}

}  // namespace regcal
