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

#include <span>
#include <vector>

#include "regcal/binary_calibrators.hpp"
#include "regcal/distributions.hpp"

namespace regcal {

enum class EmpiricalKind { Logistic, Beta };

/// One-vs-rest calibration of segment masses. K thresholds give K + 1
/// segments: (-inf, t_1], (t_1, t_2], ..., (t_K, +inf).
struct EmpiricalCalibrator {
  GridPtr grid;
  EmpiricalKind kind = EmpiricalKind::Beta;
  std::vector<BinaryCalibrator> per_segment;

  std::size_t segment_count() const noexcept { return per_segment.size(); }
};

/// Masses p_i = q_i - q_{i-1} with q_0 = 0 and q_{K+1} = 1.
std::vector<double> segment_masses(const CdfGrid& q);

EmpiricalCalibrator fit_empirical(EmpiricalKind kind, GridPtr grid,
                                  std::span<const CdfGrid> predicted_cdfs,
                                  std::span<const double> targets);

/// c_i(p_i) / sum_j c_j(p_j); uniform if every calibrated value is zero.
std::vector<double> calibrate_masses(const EmpiricalCalibrator& c, const CdfGrid& q);

/// Calibrated masses as a CDF on the calibrator's grid.
CdfGrid empirical_cdf(const EmpiricalCalibrator& c, const CdfGrid& q);

PiecewiseDensity empirical_density(const EmpiricalCalibrator& c, const CdfGrid& q);

}  // namespace regcal
