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

#include <gtest/gtest.h>

#include <algorithm>
#include <memory>
#include <numeric>
#include <set>

#include "regcal/error.hpp"
#include "regcal/harness.hpp"

namespace regcal {
namespace {

std::vector<std::size_t> sizes(const CvPlan& plan, std::size_t r) {
  std::vector<std::size_t> out;
  for (const auto& f : plan.test[r]) out.push_back(f.size());
  return out;
}

Dataset small_toy(std::size_t n = 150, std::uint64_t seed = 3) {
  ToyParams p;
  p.n = n;
  p.seed = seed;
  return generate_toy(p);
}

TEST(SplitCv, FoldSizes) {
  EXPECT_EQ(sizes(split_cv(100, 5, 1, 0), 0), (std::vector<std::size_t>{20, 20, 20, 20, 20}));
  EXPECT_EQ(sizes(split_cv(101, 5, 1, 0), 0), (std::vector<std::size_t>{21, 20, 20, 20, 20}));
}

TEST(SplitCv, PartitionsEveryRepeat) {
  const auto plan = split_cv(53, 5, 10, 4);
  EXPECT_EQ(plan.repeats() * plan.folds(), 50u);
  for (std::size_t r = 0; r < plan.repeats(); ++r) {
    std::vector<std::size_t> all;
    for (const auto& f : plan.test[r]) all.insert(all.end(), f.begin(), f.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(53);
    std::iota(expected.begin(), expected.end(), 0u);
    EXPECT_EQ(all, expected);
    for (std::size_t f = 0; f < 5; ++f) {
      const auto train = plan.train_indices(r, f);
      EXPECT_EQ(train.size() + plan.test[r][f].size(), 53u);
      std::vector<std::size_t> both;
      std::set_intersection(train.begin(), train.end(), plan.test[r][f].begin(), plan.test[r][f].end(),
                            std::back_inserter(both));
      EXPECT_TRUE(both.empty());
    }
  }
  EXPECT_NE(plan.test[0], plan.test[1]);
  EXPECT_EQ(split_cv(53, 5, 10, 4).test, plan.test);
}

TEST(SplitCv, TooFew) {
  try {
    split_cv(4, 5, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewInstances);
  }
}

TEST(Subfolds, ThreeWayPartition) {
  std::vector<std::size_t> train(40);
  std::iota(train.begin(), train.end(), 100u);
  const auto plans = plan_subfolds(train, 3, 9);
  ASSERT_EQ(plans.size(), 3u);
  std::multiset<std::size_t> calibrated;
  for (const auto& p : plans) {
    EXPECT_EQ(p.base.size() + p.calibration.size(), 40u);
    EXPECT_GE(p.calibration.size(), 13u);
    for (std::size_t i : p.calibration) {
      calibrated.insert(i);
      EXPECT_EQ(std::count(p.base.begin(), p.base.end(), i), 0);
    }
  }
  EXPECT_EQ(calibrated, std::multiset<std::size_t>(train.begin(), train.end()));
}

TEST(Config, ParseAndValidate) {
  EXPECT_EQ(parse_method("e-beta"), Method::EBeta);
  EXPECT_EQ(parse_base("gpr"), BaseKind::Gpr);
  EXPECT_EQ(parse_ensemble("cdf"), Ensemble::Cdf);
  for (auto m : {Method::None, Method::ELogistic, Method::EBeta, Method::Gpc}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  try {
    parse_method("isotonic");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
  }
  ExperimentConfig c;
  c.validate();
  c.predict_thresholds = 8;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.folds = 1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Ensemble, IdenticalMembersAreIdentity) {
  auto grid = std::make_shared<const ThresholdGrid>(build_threshold_grid(-1, 1, 16));
  const auto q = CdfGrid::from_gaussian(grid, GaussianPredictive(0.2, 0.5));
  const auto d = cdf_to_density(q);
  const std::vector<PiecewiseDensity> three(3, d);
  const auto avg = average_densities(three);
  for (std::size_t i = 0; i < d.segment_densities().size(); ++i) {
    EXPECT_NEAR(avg.segment_densities()[i], d.segment_densities()[i], 1e-14);
  }
  const std::vector<CdfGrid> qs(3, q);
  const auto via_cdf = average_cdfs(qs);
  EXPECT_NEAR(via_cdf.segment_densities()[7], d.segment_densities()[7], 1e-14);
}

TEST(Ensemble, MixtureStaysNormalized) {
  auto grid = std::make_shared<const ThresholdGrid>(build_threshold_grid(-1, 1, 32));
  const std::vector<PiecewiseDensity> parts{
      cdf_to_density(CdfGrid::from_gaussian(grid, GaussianPredictive(-1.0, 0.1))),
      cdf_to_density(CdfGrid::from_gaussian(grid, GaussianPredictive(0.0, 0.3))),
      cdf_to_density(CdfGrid::from_gaussian(grid, GaussianPredictive(1.5, 0.05)))};
  EXPECT_NEAR(average_densities(parts).total_mass(), 1.0, 1e-9);
  auto other = std::make_shared<const ThresholdGrid>(build_threshold_grid(-1, 2, 32));
  std::vector<PiecewiseDensity> mixed = parts;
  mixed.push_back(cdf_to_density(CdfGrid::from_gaussian(other, GaussianPredictive(0, 1))));
  EXPECT_THROW(average_densities(mixed), Error);
}

TEST(MaxVarianceFeature, UsesRawScale) {
  Matrix x(4, 3);
  x << 1, 100, 0.1, 2, 300, 0.2, 3, 200, 0.1, 4, 100, 0.3;
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  EXPECT_EQ(max_variance_feature(x, rows), 1);
  const std::vector<std::size_t> some{0, 3};
  EXPECT_EQ(max_variance_feature(x, some), 0);
}

TEST(RunFold, NoLeakageBookkeeping) {
  const auto data = small_toy();
  const auto plan = split_cv(data.size(), 5, 1, 1);
  const auto train = plan.train_indices(0, 2);
  const auto& test = plan.test[0][2];
  ExperimentConfig c;
  c.method = Method::EBeta;
  FoldDetail detail;
  const auto r = run_fold(c, data, train, test, 0, 2, &detail);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.n_test, test.size());
  EXPECT_EQ(detail.test_indices, test);

  const std::set<std::size_t> test_set(test.begin(), test.end());
  const std::set<std::size_t> train_set(train.begin(), train.end());
  ASSERT_EQ(detail.subfolds.size(), 3u);
  for (const auto& s : detail.subfolds) {
    for (std::size_t i : s.base) {
      EXPECT_TRUE(train_set.count(i));
      EXPECT_FALSE(test_set.count(i));
    }
    for (std::size_t i : s.calibration) {
      EXPECT_TRUE(train_set.count(i));
      EXPECT_EQ(std::count(s.base.begin(), s.base.end(), i), 0);
    }
  }

  Matrix xt(static_cast<Index>(train.size()), data.features.cols());
  Vector yt(static_cast<Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    xt.row(static_cast<Index>(i)) = data.features.row(static_cast<Index>(train[i]));
    yt[static_cast<Index>(i)] = data.targets[static_cast<Index>(train[i])];
  }
  const auto expected = Standardizer::fit(xt, yt);
  EXPECT_EQ(detail.standardizer.target_mean(), expected.target_mean());
  EXPECT_EQ(detail.standardizer.target_scale(), expected.target_scale());
  const auto all = Standardizer::fit(data.features, data.targets);
  EXPECT_NE(detail.standardizer.target_mean(), all.target_mean());

  const Vector z = expected.transform_targets(yt);
  const auto grid = build_threshold_grid(z.minCoeff(), z.maxCoeff(), c.train_thresholds);
  EXPECT_EQ(*detail.train_grid, grid);

  ASSERT_EQ(detail.densities.size(), test.size());
  for (const auto& d : detail.densities) EXPECT_NEAR(d.total_mass(), 1.0, 1e-9);
  EXPECT_EQ(detail.reliability.size(), c.train_thresholds);
}

TEST(RunFold, GprSelectsFeature) {
  auto data = small_toy(60);
  Matrix wide(data.features.rows(), 2);
  wide.col(0) = 0.01 * data.features.col(0);
  wide.col(1) = data.features.col(0);
  data.features = wide;
  const auto plan = split_cv(data.size(), 5, 1, 0);
  ExperimentConfig c;
  c.base = BaseKind::Gpr;
  c.method = Method::None;
  FoldDetail detail;
  run_fold(c, data, plan.train_indices(0, 0), plan.test[0][0], 0, 0, &detail);
  ASSERT_TRUE(detail.selected_feature.has_value());
  EXPECT_EQ(*detail.selected_feature, 1);
  EXPECT_EQ(detail.gaussians.size(), plan.test[0][0].size());
}

TEST(RunExperiment, FoldCountAndDeterminism) {
  ExperimentConfig c;
  c.repeats = 1;
  c.folds = 5;
  c.method = Method::ELogistic;
  c.train_thresholds = 8;
  c.predict_thresholds = 8;
  const auto data = small_toy(120);
  const auto a = run_experiment(c, data);
  ASSERT_EQ(a.folds.size(), 5u);
  EXPECT_EQ(a.summary.completed, 5u);
  c.jobs = 3;
  const auto b = run_experiment(c, data);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.folds[i].fold_index, i);
    EXPECT_EQ(a.folds[i].mean_log_likelihood, b.folds[i].mean_log_likelihood);
    EXPECT_EQ(a.folds[i].calibration_deviation, b.folds[i].calibration_deviation);
    EXPECT_EQ(a.folds[i].n_floored, b.folds[i].n_floored);
  }
  double mean = 0.0;
  for (const auto& f : a.folds) mean += f.mean_log_likelihood;
  EXPECT_NEAR(a.summary.mean_log_likelihood, mean / 5.0, 1e-12);
}

TEST(RunExperiment, FailedFoldIsRecorded) {
  Dataset d;
  d.name = "spike";
  d.features = Matrix(10, 1);
  d.targets = Vector::Zero(10);
  for (Index i = 0; i < 10; ++i) d.features(i, 0) = static_cast<double>(i);
  d.targets[4] = 1.0;
  ExperimentConfig c;
  c.dataset = "spike";
  c.repeats = 1;
  c.method = Method::None;
  const auto r = run_experiment(c, d);
  ASSERT_EQ(r.folds.size(), 5u);
  EXPECT_EQ(r.summary.failed, 1u);
  EXPECT_EQ(r.summary.completed, 4u);
  for (const auto& f : r.folds) {
    if (!f.ok()) EXPECT_NE(f.error.find("fold"), std::string::npos);
  }
}

TEST(RunExperiment, TooFewInstances) {
  ExperimentConfig c;
  c.repeats = 1;
  try {
    run_experiment(c, small_toy(9));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewInstances);
  }
}

TEST(Aggregate, SampleStd) {
  std::vector<FoldResult> f(3);
  f[0].mean_log_likelihood = 1;
  f[1].mean_log_likelihood = 2;
  f[2].mean_log_likelihood = 3;
  f.push_back({});
  f.back().error = "boom";
  const auto a = aggregate(f);
  EXPECT_EQ(a.completed, 3u);
  EXPECT_EQ(a.failed, 1u);
  EXPECT_DOUBLE_EQ(a.mean_log_likelihood, 2.0);
  EXPECT_DOUBLE_EQ(a.std_log_likelihood, 1.0);
}

}  // namespace
}  // namespace regcal
