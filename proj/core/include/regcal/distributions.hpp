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

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace regcal {

inline constexpr double kStddevFloor = 1e-6;
/// Lowest density (per unit target) any piecewise density reports.
inline constexpr double kDensityFloor = 1e-9;
/// CDF values are kept inside [kCdfClamp, 1 - kCdfClamp] before logits.
inline constexpr double kCdfClamp = 1e-12;

/// Predictive Gaussian from a base regressor. The stddev is floored.
struct GaussianPredictive {
  double mean = 0.0;
  double stddev = 1.0;

  GaussianPredictive() = default;
  GaussianPredictive(double mean, double stddev, double floor = kStddevFloor);

  double log_pdf(double y) const;
};

double gaussian_cdf(const GaussianPredictive& d, double t);

/// Strictly increasing thresholds t_1 < ... < t_K together with the range
/// they were drawn from.
class ThresholdGrid {
 public:
  ThresholdGrid(std::vector<double> thresholds, double range_low, double range_high);

  /// count points from low to high inclusive, equal spacing.
  static ThresholdGrid equally_spaced(double low, double high, std::size_t count);

  std::span<const double> thresholds() const noexcept { return thresholds_; }
  std::size_t size() const noexcept { return thresholds_.size(); }
  double operator[](std::size_t i) const { return thresholds_[i]; }
  double front() const { return thresholds_.front(); }
  double back() const { return thresholds_.back(); }
  double range_low() const noexcept { return range_low_; }
  double range_high() const noexcept { return range_high_; }
  /// Virtual width over which each tail's mass is spread.
  double tail_width() const noexcept { return 0.5 * (range_high_ - range_low_); }

  /// Segment containing y with right-closed intervals: 0 is (-inf, t_1],
  /// i is (t_i, t_{i+1}], size() is (t_K, +inf).
  std::size_t segment_of(double y) const;

  bool operator==(const ThresholdGrid& other) const = default;

 private:
  std::vector<double> thresholds_;
  double range_low_;
  double range_high_;
};

using GridPtr = std::shared_ptr<const ThresholdGrid>;

/// K equally spaced thresholds over [y_min - 0.5 r, y_max + 0.5 r] with
/// r = y_max - y_min, endpoints included. Throws DegenerateRange when
/// y_max <= y_min.
ThresholdGrid build_threshold_grid(double y_min, double y_max, std::size_t count);

/// CDF samples q_i = G(t_i) on a shared grid; non-decreasing, inside [0, 1].
class CdfGrid {
 public:
  CdfGrid(GridPtr grid, std::vector<double> values);

  static CdfGrid from_gaussian(GridPtr grid, const GaussianPredictive& d);

  const ThresholdGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Piecewise-constant density: one density per interior segment
/// (t_i, t_{i+1}] plus the probability mass of the two tails.
class PiecewiseDensity {
 public:
  PiecewiseDensity(GridPtr grid, std::vector<double> segment_densities, double tail_mass_low,
                   double tail_mass_high);

  const ThresholdGrid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> segment_densities() const noexcept { return densities_; }
  double tail_mass_low() const noexcept { return tail_low_; }
  double tail_mass_high() const noexcept { return tail_high_; }

  double total_mass() const;
  /// Density at y; tails spread their mass uniformly over tail_width()
  /// beyond the outer thresholds. Never below kDensityFloor.
  double density_at(double y) const;
  /// Integral of the density up to y.
  double cdf_at(double y) const;

 private:
  GridPtr grid_;
  std::vector<double> densities_;
  double tail_low_;
  double tail_high_;
};

/// Builds a density from per-segment densities and tail masses: segments
/// below `floor` are raised to it and the remaining mass is rescaled so the
/// total is 1. Inputs that need no flooring are passed through unchanged.
PiecewiseDensity normalize_density(GridPtr grid, std::vector<double> segment_densities,
                                   double tail_mass_low, double tail_mass_high,
                                   double floor = kDensityFloor);

/// Finite differences of the CDF: (q_{i+1} - q_i) / (t_{i+1} - t_i), with
/// tails q_1 and 1 - q_K, then normalize_density.
PiecewiseDensity cdf_to_density(const CdfGrid& cdf);

inline double density_at(const PiecewiseDensity& p, double y) { return p.density_at(y); }

/// Running maximum followed by clamping to [lo, hi].
std::vector<double> monotone_project(std::span<const double> values, double lo = 0.0,
                                     double hi = 1.0);

}  // namespace regcal
