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
#include <optional>
#include <span>
#include <vector>

#include "regcal/binary_calibrators.hpp"
#include "regcal/distributions.hpp"

namespace regcal {

/// Mean prediction and positive rate of one bin; both absent when empty.
struct ReliabilityBin {
  std::optional<double> mean_predicted;
  std::optional<double> empirical_frequency;
  std::size_t count = 0;
};

struct ReliabilityLine {
  double threshold = 0.0;
  std::vector<ReliabilityBin> bins;
};

/// Index of the right-closed equal-width bin holding p; 0 lands in bin 0.
std::size_t reliability_bin(double p, std::size_t n_bins);

ReliabilityLine reliability_line(std::span<const double> predicted, std::span<const Label> outcomes,
                                 std::size_t n_bins = 8, double threshold = 0.0);

/// Count-weighted mean |mean_predicted - empirical_frequency| over every
/// occupied bin of every line.
double calibration_deviation(std::span<const ReliabilityLine> lines);

struct ScoreReport {
  double mean_log_likelihood = 0.0;
  std::vector<double> per_instance_log_densities;
  std::size_t n_floored = 0;
};

/// ln density_at(target) per instance. Densities live on a standardized
/// target scale; `target_scale` converts them back to original units.
ScoreReport log_likelihood(std::span<const PiecewiseDensity> densities,
                           std::span<const double> targets, double target_scale = 1.0);

ScoreReport log_likelihood(std::span<const GaussianPredictive> densities,
                           std::span<const double> targets, double target_scale = 1.0);

}  // namespace regcal
