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

#include "regcal/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "regcal/error.hpp"

namespace regcal {

GaussianPredictive::GaussianPredictive(double m, double s, double floor) : mean(m) {
  if (!std::isfinite(m) || std::isnan(s)) {
    throw Error(ErrorKind::InvalidArgument, "gaussian predictive needs a finite mean and stddev");
  }
  stddev = std::max(s, floor);
}

double GaussianPredictive::log_pdf(double y) const {
  const double z = (y - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double gaussian_cdf(const GaussianPredictive& d, double t) {
  return 0.5 * std::erfc(-(t - d.mean) / (d.stddev * std::numbers::sqrt2));
}

ThresholdGrid::ThresholdGrid(std::vector<double> thresholds, double range_low, double range_high)
    : thresholds_(std::move(thresholds)), range_low_(range_low), range_high_(range_high) {
  if (thresholds_.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "a threshold grid needs at least two thresholds");
  }
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!std::isfinite(thresholds_[i])) {
      throw Error(ErrorKind::InvalidArgument, "thresholds must be finite");
    }
    if (i > 0 && !(thresholds_[i] > thresholds_[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "thresholds must be strictly increasing");
    }
  }
  if (!(range_low_ <= thresholds_.front()) || !(thresholds_.back() <= range_high_)) {
    throw Error(ErrorKind::InvalidArgument, "range must bracket the thresholds");
  }
}

ThresholdGrid ThresholdGrid::equally_spaced(double low, double high, std::size_t count) {
  if (count < 2) throw Error(ErrorKind::InvalidArgument, "threshold count must be >= 2");
  if (!(high > low) || !std::isfinite(low) || !std::isfinite(high)) {
    throw Error(ErrorKind::DegenerateRange, "grid range must satisfy low < high");
  }
  std::vector<double> t(count);
  const double span = high - low;
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) t[i] = low + span * (static_cast<double>(i) / last);
  t.front() = low;
  t.back() = high;
  return ThresholdGrid(std::move(t), low, high);
}

std::size_t ThresholdGrid::segment_of(double y) const {
  return static_cast<std::size_t>(
      std::lower_bound(thresholds_.begin(), thresholds_.end(), y) - thresholds_.begin());
}

ThresholdGrid build_threshold_grid(double y_min, double y_max, std::size_t count) {
  if (!std::isfinite(y_min) || !std::isfinite(y_max) || !(y_max > y_min)) {
    throw Error(ErrorKind::DegenerateRange,
                "target range is degenerate: [" + std::to_string(y_min) + ", " +
                    std::to_string(y_max) + "]");
  }
  const double extra = 0.5 * (y_max - y_min);
  return ThresholdGrid::equally_spaced(y_min - extra, y_max + extra, count);
}

CdfGrid::CdfGrid(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw Error(ErrorKind::InvalidArgument, "cdf grid needs a threshold grid");
  if (values_.size() != grid_->size()) {
    throw Error(ErrorKind::GridMismatch, "cdf values do not match the grid size");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "cdf values must lie in [0, 1]");
    }
    if (i > 0 && values_[i] < values_[i - 1]) {
      throw Error(ErrorKind::InvalidArgument, "cdf values must be non-decreasing");
    }
  }
}

CdfGrid CdfGrid::from_gaussian(GridPtr grid, const GaussianPredictive& d) {
  std::vector<double> q(grid->size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = gaussian_cdf(d, (*grid)[i]);
  return CdfGrid(std::move(grid), monotone_project(q));
}

PiecewiseDensity::PiecewiseDensity(GridPtr grid, std::vector<double> segment_densities,
                                   double tail_mass_low, double tail_mass_high)
    : grid_(std::move(grid)),
      densities_(std::move(segment_densities)),
      tail_low_(tail_mass_low),
      tail_high_(tail_mass_high) {
  if (!grid_) throw Error(ErrorKind::InvalidArgument, "density needs a threshold grid");
  if (densities_.size() + 1 != grid_->size()) {
    throw Error(ErrorKind::GridMismatch, "one density per interior segment is required");
  }
  const auto bad = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
  if (bad(tail_low_) || bad(tail_high_) || std::any_of(densities_.begin(), densities_.end(), bad)) {
    throw Error(ErrorKind::InvalidArgument, "densities and tail masses must be finite and >= 0");
  }
}

double PiecewiseDensity::total_mass() const {
  const auto t = grid_->thresholds();
  double mass = tail_low_ + tail_high_;
  for (std::size_t i = 0; i < densities_.size(); ++i) mass += densities_[i] * (t[i + 1] - t[i]);
  return mass;
}

double PiecewiseDensity::density_at(double y) const {
  const auto& g = *grid_;
  const double width = g.tail_width();
  const std::size_t seg = g.segment_of(y);
  if (seg == 0) {
    if (y >= g.front() - width) return std::max(tail_low_ / width, kDensityFloor);
    return kDensityFloor;
  }
  if (seg == g.size()) {
    if (y <= g.back() + width) return std::max(tail_high_ / width, kDensityFloor);
    return kDensityFloor;
  }
  return std::max(densities_[seg - 1], kDensityFloor);
}

double PiecewiseDensity::cdf_at(double y) const {
  const auto& g = *grid_;
  const auto t = g.thresholds();
  const double width = g.tail_width();
  if (y <= g.front()) {
    return tail_low_ * std::clamp((y - (g.front() - width)) / width, 0.0, 1.0);
  }
  double mass = tail_low_;
  for (std::size_t i = 0; i < densities_.size(); ++i) {
    if (y <= t[i + 1]) return mass + densities_[i] * (y - t[i]);
    mass += densities_[i] * (t[i + 1] - t[i]);
  }
  return mass + tail_high_ * std::clamp((y - g.back()) / width, 0.0, 1.0);
}

PiecewiseDensity normalize_density(GridPtr grid, std::vector<double> d, double tail_low,
                                   double tail_high, double floor) {
  const auto t = grid->thresholds();
  const std::size_t n = d.size();
  std::vector<double> width(n);
  for (std::size_t i = 0; i < n; ++i) width[i] = t[i + 1] - t[i];

  std::vector<bool> floored(n, false);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] < floor) floored[i] = any = true;
  }
  if (!any) return PiecewiseDensity(std::move(grid), std::move(d), tail_low, tail_high);

  // Water-filling: floored segments sit exactly at the floor and the free
  // mass is rescaled; repeat while rescaling pushes more segments under.
  double scale = 1.0;
  for (;;) {
    double floor_mass = 0.0;
    double free_mass = tail_low + tail_high;
    for (std::size_t i = 0; i < n; ++i) {
      if (floored[i]) {
        floor_mass += floor * width[i];
      } else {
        free_mass += d[i] * width[i];
      }
    }
    scale = free_mass > 0.0 ? (1.0 - floor_mass) / free_mass : 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!floored[i] && d[i] * scale < floor) floored[i] = changed = true;
    }
    if (!changed) break;
  }
  for (std::size_t i = 0; i < n; ++i) d[i] = floored[i] ? floor : d[i] * scale;
  return PiecewiseDensity(std::move(grid), std::move(d), tail_low * scale, tail_high * scale);
}

PiecewiseDensity cdf_to_density(const CdfGrid& cdf) {
  const auto t = cdf.grid().thresholds();
  const auto q = cdf.values();
  std::vector<double> d(q.size() - 1);
  for (std::size_t i = 0; i + 1 < q.size(); ++i) d[i] = (q[i + 1] - q[i]) / (t[i + 1] - t[i]);
  return normalize_density(cdf.grid_ptr(), std::move(d), q.front(), 1.0 - q.back());
}

std::vector<double> monotone_project(std::span<const double> values, double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorKind::InvalidArgument, "monotone_project needs lo <= hi");
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace regcal
