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

#include "regcal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "regcal/error.hpp"
#include "regcal/rng.hpp"

namespace regcal {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front()) {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split(const std::string& line, std::optional<char> delim) {
  std::vector<std::string> out;
  if (!delim) {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(trim(tok));
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(*delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_missing(const std::string& tok) {
  std::string lower = tok;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.empty() || lower == "na" || lower == "n/a" || lower == "nan" || lower == "?";
}

std::optional<double> parse_number(const std::string& tok) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string>& names) {
  if (const auto* name = std::get_if<std::string>(&ref)) {
    const auto it = std::find(names.begin(), names.end(), *name);
    if (it == names.end()) throw Error(ErrorKind::TargetColumnMissing, "no column named '" + *name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }
  const long idx = std::get<long>(ref);
  const long n = static_cast<long>(names.size());
  const long resolved = idx < 0 ? n + idx : idx;
  if (resolved < 0 || resolved >= n) {
    throw Error(ErrorKind::TargetColumnMissing, "column index " + std::to_string(idx) + " out of range");
  }
  return static_cast<std::size_t>(resolved);
}

enum class Cell : std::uint8_t { Ok, Missing, Bad };

}  // namespace

Dataset generate_toy(const ToyParams& p) {
  if (!(p.noise_std > 0.0)) throw Error(ErrorKind::InvalidArgument, "noise_std must be positive");
  if (!(p.feature_low < p.feature_high)) {
    throw Error(ErrorKind::InvalidArgument, "feature range must have low < high");
  }
  if (!(p.mix >= 0.0 && p.mix <= 1.0)) throw Error(ErrorKind::InvalidArgument, "mix must lie in [0, 1]");
  if (p.n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");

  Rng rng(p.seed);
  Dataset d;
  d.name = "toy";
  d.features.resize(static_cast<Index>(p.n), 1);
  d.targets.resize(static_cast<Index>(p.n));
  d.feature_names = {"x"};
  for (Index i = 0; i < static_cast<Index>(p.n); ++i) {
    const double x = rng.uniform(p.feature_low, p.feature_high);
    const bool ascending = rng.bernoulli(p.mix);
    const double noise = rng.normal(0.0, p.noise_std);
    d.features(i, 0) = x;
    d.targets[i] = (ascending ? p.slope * x : p.flat_level) + noise;
  }
  d.provenance = GeneratedFrom{p};
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> names;
  std::string line;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split(line, options.delimiter);
    if (header_pending) {
      names = std::move(fields);
      header_pending = false;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (names.empty()) {
    const std::size_t width = rows.empty() ? 0 : rows.front().size();
    for (std::size_t c = 0; c < width; ++c) names.push_back("column_" + std::to_string(c));
  }
  if (names.empty()) throw Error(ErrorKind::EmptyAfterFiltering, path.string() + " has no columns");

  const std::size_t target = resolve_column(options.target, names);
  std::vector<bool> keep(names.size(), true);
  for (const auto& drop : options.drop_columns) {
    const auto it = std::find(names.begin(), names.end(), drop);
    if (it != names.end()) keep[static_cast<std::size_t>(it - names.begin())] = false;
  }
  keep[target] = true;

  const std::size_t width = names.size();
  std::vector<std::vector<double>> values(rows.size(), std::vector<double>(width, 0.0));
  std::vector<std::vector<Cell>> state(rows.size(), std::vector<Cell>(width, Cell::Missing));
  std::vector<std::size_t> bad(width, 0);
  std::vector<std::size_t> present(width, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) continue;
    for (std::size_t c = 0; c < width; ++c) {
      if (!keep[c] || is_missing(rows[r][c])) continue;
      ++present[c];
      if (const auto v = parse_number(rows[r][c])) {
        values[r][c] = *v;
        state[r][c] = Cell::Ok;
      } else {
        state[r][c] = Cell::Bad;
        ++bad[c];
      }
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    if (keep[c] && present[c] > 0 && 2 * bad[c] > present[c]) {
      throw Error(ErrorKind::NonNumericColumn, "column '" + names[c] + "' is not numeric");
    }
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < width; ++c) {
    if (keep[c] && c != target) feature_cols.push_back(c);
  }
  std::vector<std::size_t> good_rows;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) continue;
    bool ok = state[r][target] == Cell::Ok;
    for (std::size_t c : feature_cols) ok = ok && state[r][c] == Cell::Ok;
    if (ok) good_rows.push_back(r);
  }
  if (good_rows.empty()) {
    throw Error(ErrorKind::EmptyAfterFiltering, path.string() + " has no complete rows");
  }

  Dataset d;
  d.name = path.stem().string();
  d.features.resize(static_cast<Index>(good_rows.size()), static_cast<Index>(feature_cols.size()));
  d.targets.resize(static_cast<Index>(good_rows.size()));
  for (std::size_t c : feature_cols) d.feature_names.push_back(names[c]);
  for (std::size_t i = 0; i < good_rows.size(); ++i) {
    const auto& row = values[good_rows[i]];
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      d.features(static_cast<Index>(i), static_cast<Index>(j)) = row[feature_cols[j]];
    }
    d.targets[static_cast<Index>(i)] = row[target];
  }
  d.provenance = LoadedFrom{path, rows.size() - good_rows.size()};
  return d;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& name : data.feature_names) out << name << ',';
  for (Index c = static_cast<Index>(data.feature_names.size()); c < data.features.cols(); ++c) {
    out << "x" << c << ',';
  }
  out << "y\n";
  out.precision(17);
  for (Index i = 0; i < data.features.rows(); ++i) {
    for (Index c = 0; c < data.features.cols(); ++c) out << data.features(i, c) << ',';
    out << data.targets[i] << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

std::vector<RegistryEntry> default_registry() {
  std::vector<RegistryEntry> r;
  r.push_back({"diabetes", "diabetes.tab.txt", {std::string("Y"), '\t', true, {}}});
  r.push_back({"boston", "housing.data", {-1L, std::nullopt, false, {}}});
  r.push_back({"airfoil", "airfoil_self_noise.dat", {-1L, '\t', false, {}}});
  r.push_back({"forestfire", "forestfires.csv", {std::string("area"), ',', true, {"month", "day"}}});
  r.push_back({"concrete", "concrete.csv", {-1L, ',', true, {}}});
  return r;
}

std::vector<RegistryEntry> load_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open registry " + path.string());
  std::vector<RegistryEntry> out;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& e : doc.at("datasets")) {
      RegistryEntry entry;
      entry.name = e.at("name").get<std::string>();
      entry.filename = e.at("file").get<std::string>();
      if (e.contains("target")) {
        const auto& t = e.at("target");
        entry.csv.target = t.is_number_integer() ? ColumnRef(t.get<long>()) : ColumnRef(t.get<std::string>());
      }
      if (e.contains("delimiter")) {
        const auto delim = e.at("delimiter").get<std::string>();
        if (delim == "whitespace") {
          entry.csv.delimiter = std::nullopt;
        } else if (delim.size() == 1) {
          entry.csv.delimiter = delim.front();
        } else if (delim == "\\t") {
          entry.csv.delimiter = '\t';
        } else {
          throw Error(ErrorKind::ConfigError, "registry delimiter must be one character: " + delim);
        }
      }
      entry.csv.has_header = e.value("header", true);
      entry.csv.drop_columns = e.value("drop", std::vector<std::string>{});
      out.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorKind::ConfigError, "registry " + path.string() + ": " + ex.what());
  }
  return out;
}

std::filesystem::path data_root(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("REGCAL_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return fallback;
}

Dataset resolve_dataset(const std::string& name, const std::vector<RegistryEntry>& registry,
                        const std::filesystem::path& root, const ToyParams& toy) {
  if (name == "toy") return generate_toy(toy);
  for (const auto& entry : registry) {
    if (entry.name == name) {
      Dataset d = load_csv(root / entry.filename, entry.csv);
      d.name = entry.name;
      return d;
    }
  }
  if (std::filesystem::exists(name)) return load_csv(name);
  throw Error(ErrorKind::FileNotFound, "dataset '" + name + "' is neither registered nor a file");
}

Standardizer Standardizer::fit(const Matrix& features, const Vector& targets) {
  if (targets.size() == 0 || features.rows() != targets.size()) {
    throw Error(ErrorKind::DimensionMismatch, "standardizer needs matching non-empty data");
  }
  Standardizer s;
  const double n = static_cast<double>(targets.size());
  s.feature_mean_ = features.colwise().mean().transpose();
  s.feature_scale_.resize(features.cols());
  for (Index c = 0; c < features.cols(); ++c) {
    const double var = (features.col(c).array() - s.feature_mean_[c]).square().sum() / n;
    const double sd = std::sqrt(var);
    s.feature_scale_[c] = sd > 1e-12 * std::max(1.0, std::abs(s.feature_mean_[c])) ? sd : 1.0;
  }
  s.target_mean_ = targets.mean();
  const double sd = std::sqrt((targets.array() - s.target_mean_).square().sum() / n);
  s.target_scale_ = sd > 1e-12 * std::max(1.0, std::abs(s.target_mean_)) ? sd : 1.0;
  return s;
}

Matrix Standardizer::transform_features(const Matrix& x) const {
  return (x.rowwise() - feature_mean_.transpose()).array().rowwise() /
         feature_scale_.transpose().array();
}

Vector Standardizer::transform_targets(const Vector& y) const {
  return (y.array() - target_mean_) / target_scale_;
}

Matrix Standardizer::inverse_features(const Matrix& z) const {
  return (z.array().rowwise() * feature_scale_.transpose().array()).matrix().rowwise() +
         feature_mean_.transpose();
}

Vector Standardizer::inverse_targets(const Vector& z) const {
  return z.array() * target_scale_ + target_mean_;
}

}  // namespace regcal
