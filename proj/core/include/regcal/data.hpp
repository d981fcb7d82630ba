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
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "regcal/numerics.hpp"

namespace regcal {

struct ToyParams {
  std::size_t n = 2000;
  double slope = 2.0;
  double flat_level = 1.0;
  double noise_std = 0.2;
  double mix = 0.5;  // probability of the ascending line
  double feature_low = 0.0;
  double feature_high = 2.0;
  std::uint64_t seed = 7;
};

struct GeneratedFrom {
  ToyParams params;
};
struct LoadedFrom {
  std::filesystem::path path;
  std::size_t dropped_rows = 0;
};

struct Dataset {
  std::string name;
  Matrix features;
  Vector targets;
  std::vector<std::string> feature_names;
  std::variant<GeneratedFrom, LoadedFrom> provenance;

  std::size_t size() const noexcept { return static_cast<std::size_t>(targets.size()); }
};

/// x ~ U(low, high); with probability mix y = slope x + e, otherwise
/// y = flat_level + e, e ~ N(0, noise_std^2).
Dataset generate_toy(const ToyParams& params);

/// Column chosen by header name or by position (negative counts from the
/// end, so -1 is the last column).
using ColumnRef = std::variant<std::string, long>;

struct CsvOptions {
  ColumnRef target = -1L;
  /// Field separator; nullopt splits on runs of whitespace.
  std::optional<char> delimiter = ',';
  bool has_header = true;
  std::vector<std::string> drop_columns;
};

/// Parses every column as a number. Rows with an empty, NA, N/A, nan or ?
/// cell, an unparsable cell, or the wrong field count are dropped and
/// counted in the provenance. A feature column in which most non-missing
/// cells are not numbers is rejected with NonNumericColumn.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

void write_csv(const std::filesystem::path& path, const Dataset& data);

struct RegistryEntry {
  std::string name;
  std::string filename;
  CsvOptions csv;
};

/// Built-in entries for diabetes, boston, airfoil, forestfire and concrete.
std::vector<RegistryEntry> default_registry();

/// Reads a JSON registry: {"datasets": [{"name", "file", "target",
/// "delimiter", "header", "drop"}, ...]}. "target" is a column name or an
/// integer index; "delimiter" is a one-character string or "whitespace".
std::vector<RegistryEntry> load_registry(const std::filesystem::path& path);

/// Root directory for registry files: $REGCAL_DATA_DIR if set, else
/// `fallback`.
std::filesystem::path data_root(const std::filesystem::path& fallback = "data");

/// "toy" (with `toy`), a registry name, or a path to a CSV file whose last
/// column is the target.
Dataset resolve_dataset(const std::string& name, const std::vector<RegistryEntry>& registry,
                        const std::filesystem::path& root, const ToyParams& toy = {});

/// Per-column (population) standardization fitted on one split.
class Standardizer {
 public:
  static Standardizer fit(const Matrix& features, const Vector& targets);

  Matrix transform_features(const Matrix& x) const;
  Vector transform_targets(const Vector& y) const;
  double transform_target(double y) const { return (y - target_mean_) / target_scale_; }
  Matrix inverse_features(const Matrix& z) const;
  Vector inverse_targets(const Vector& z) const;

  /// Density on the standardized scale expressed in original units.
  double density_to_original(double d) const { return d / target_scale_; }

  const Vector& feature_mean() const noexcept { return feature_mean_; }
  const Vector& feature_scale() const noexcept { return feature_scale_; }
  double target_mean() const noexcept { return target_mean_; }
  double target_scale() const noexcept { return target_scale_; }

 private:
  Vector feature_mean_;
  Vector feature_scale_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
};

}  // namespace regcal
