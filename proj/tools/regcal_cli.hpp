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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regcal/harness.hpp"

namespace regcal::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kPartialFailure = 2, kIoFailure = 3 };

/// results.csv columns, in order.
inline constexpr std::string_view kResultsHeader =
    "repeat,fold,method,base,K_train,mean_log_likelihood,calibration_deviation,wall_time";
inline constexpr std::string_view kSweepSummaryHeader =
    "method,base,K_train,completed,failed,mean_log_likelihood,std_log_likelihood,"
    "mean_calibration_deviation,std_calibration_deviation";
inline constexpr std::string_view kReliabilityHeader =
    "method,threshold,bin,mean_predicted,empirical_frequency,count";

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Sets one field from its key=value spelling. Throws ConfigError naming
/// the key.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Flat key=value text; blank lines and '#' comments are skipped.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig config = {});
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig config = {});

ConfigEntries config_entries(const ExperimentConfig& config);
std::string format_config(const ExperimentConfig& config);

std::string format_result_row(const FoldResult& r, const ExperimentConfig& config);

/// Pools the per-fold lines of one method by threshold index: bins merge
/// count-weighted and the threshold is the mean over folds.
std::vector<ReliabilityLine> pool_reliability(const std::vector<std::vector<ReliabilityLine>>& per_fold);

/// Entry point; `args` excludes the program name.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace regcal::cli
