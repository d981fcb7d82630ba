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

#include <cmath>
#include <memory>
#include <vector>

#include "oracles.hpp"
#include "regcal/binary_calibrators.hpp"
#include "regcal/empirical_calibration.hpp"
#include "regcal/error.hpp"
#include "regcal/numerics.hpp"
#include "regcal/rng.hpp"

namespace regcal {
namespace {

struct Sample {
  std::vector<double> scores;
  std::vector<Label> labels;
};

template <class F>
Sample draw(std::size_t n, std::uint64_t seed, F truth) {
  Rng rng(seed);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0.001, 0.999);
    s.scores.push_back(x);
    s.labels.push_back(rng.bernoulli(truth(x)) ? 1 : 0);
  }
  return s;
}

TEST(ApplyLogistic, Values) {
  EXPECT_DOUBLE_EQ(apply_logistic({2.0, -1.0}, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(apply_logistic({0.0, 0.0}, 0.13), 0.5);
  EXPECT_NEAR(apply_logistic({1.0, 0.0}, 1.0), 0.7310585786300049, 1e-12);
}

TEST(ApplyBeta, IdentityAndFixedPoint) {
  EXPECT_NEAR(apply_beta({1, 1, 0}, 0.3), 0.3, 1e-12);
  EXPECT_NEAR(apply_beta({1, 1, 0}, 0.5), 0.5, 1e-12);
  EXPECT_NEAR(apply_beta({2, 2, 0}, 0.5), 0.5, 1e-12);
  const double expected = oracle::logistic(2.0 * std::log(0.25 / 0.75));
  EXPECT_NEAR(apply_beta({2, 2, 0}, 0.25), expected, 1e-12);
  EXPECT_LT(apply_beta({2, 2, 0}, 0.25), 0.25);
}

TEST(ApplyBeta, IdentityOnUnitInterval) {
  for (int i = 0; i <= 1000; ++i) {
    const double s = i / 1000.0;
    EXPECT_NEAR(apply_beta({1, 1, 0}, s), s, 1e-9);
  }
}

TEST(Apply, MonotoneInScore) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const BetaCalibrator b{rng.uniform(0, 5), rng.uniform(0, 5), rng.normal(0, 3)};
    const LogisticCalibrator l{rng.normal(0, 5), rng.normal(0, 5)};
    double prev_b = -1.0;
    for (int i = 0; i <= 200; ++i) {
      const double s = i / 200.0;
      const double vb = apply_beta(b, s);
      EXPECT_GE(vb, prev_b);
      prev_b = vb;
    }
    const double lo = apply_logistic(l, 0.2), hi = apply_logistic(l, 0.8);
    if (l.gamma >= 0) EXPECT_LE(lo, hi);
    else EXPECT_GE(lo, hi);
  }
}

TEST(FitLogistic, RecoversParameters) {
  const auto s = draw(10000, 21, [](double x) { return oracle::logistic(3 * x - 1.5); });
  const auto c = fit_logistic(s.scores, s.labels);
  EXPECT_NEAR(c.gamma, 3.0, 0.2);
  EXPECT_NEAR(c.delta, -1.5, 0.2);

  const auto nll = [&](const std::vector<double>& p) {
    std::vector<double> eta(s.scores.size());
    for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = p[0] * s.scores[i] + p[1];
    return oracle::bernoulli_nll(eta, s.labels);
  };
  const auto mle = oracle::grid_search_min(nll, {0.0, 0.0}, {6.0, 6.0});
  EXPECT_NEAR(c.gamma, mle[0], 1e-3);
  EXPECT_NEAR(c.delta, mle[1], 1e-3);
}

TEST(FitLogistic, Stationarity) {
  const auto s = draw(3000, 22, [](double x) { return 0.2 + 0.5 * x * x; });
  const auto c = fit_logistic(s.scores, s.labels);
  double r0 = 0.0, r1 = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    const double e = apply_logistic(c, s.scores[i]) - s.labels[i];
    r0 += e;
    r1 += s.scores[i] * e;
  }
  const double n = static_cast<double>(s.scores.size());
  EXPECT_LT(std::abs(r0), 1e-5 * n);
  EXPECT_LT(std::abs(r1), 1e-5 * n);
  EXPECT_NEAR(r0 / n, 0.0, 1e-6);
}

TEST(FitLogistic, OneClass) {
  const std::vector<double> scores{0.1, 0.4, 0.9};
  const std::vector<Label> labels{1, 1, 1};
  const auto c = fit_logistic(scores, labels);
  EXPECT_EQ(c.gamma, 0.0);
  EXPECT_NEAR(oracle::logistic(c.delta), 4.0 / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(smoothed_positive_rate(labels), 0.8);
}

TEST(FitLogistic, IndependentLabels) {
  const auto s = draw(4000, 23, [](double) { return 0.5; });
  const auto c = fit_logistic(s.scores, s.labels);
  EXPECT_LT(std::abs(c.gamma), 0.3);
  for (double x : {0.1, 0.5, 0.9}) EXPECT_NEAR(apply_logistic(c, x), 0.5, 0.05);
}

TEST(FitLogistic, LengthMismatch) {
  const std::vector<double> scores{0.1, 0.4};
  const std::vector<Label> labels{1};
  EXPECT_THROW(fit_logistic(scores, labels), Error);
}

TEST(FitBeta, IdentityTruth) {
  const auto s = draw(10000, 24, [](double x) { return x; });
  const auto c = fit_beta(s.scores, s.labels);
  EXPECT_NEAR(c.a, 1.0, 0.15);
  EXPECT_NEAR(c.b, 1.0, 0.15);
  EXPECT_NEAR(c.m, 0.0, 0.15);
}

TEST(FitBeta, RecoversSharpening) {
  const auto s = draw(10000, 25, [](double x) { return oracle::logistic(2 * std::log(x / (1 - x))); });
  const auto c = fit_beta(s.scores, s.labels);
  EXPECT_NEAR(c.a, 2.0, 0.3);
  EXPECT_NEAR(c.b, 2.0, 0.3);
  EXPECT_NEAR(c.m, 0.0, 0.3);

  const auto nll = [&](const std::vector<double>& p) {
    std::vector<double> eta(s.scores.size());
    for (std::size_t i = 0; i < eta.size(); ++i) {
      eta[i] = p[2] + p[0] * std::log(s.scores[i]) - p[1] * std::log1p(-s.scores[i]);
    }
    return oracle::bernoulli_nll(eta, s.labels);
  };
  const auto mle = oracle::grid_search_min(nll, {1.0, 1.0, 0.0}, {4.0, 4.0, 4.0});
  EXPECT_NEAR(c.a, mle[0], 1e-3);
  EXPECT_NEAR(c.b, mle[1], 1e-3);
  EXPECT_NEAR(c.m, mle[2], 1e-3);
}

TEST(FitBeta, RepairsNegativeCoefficient) {
  // Positive rate falls as s grows near 1, pushing b below zero.
  const auto s = draw(5000, 26, [](double x) { return oracle::logistic(1.5 * std::log(x) + 0.8 * std::log1p(-x) + 1); });
  const auto c = fit_beta(s.scores, s.labels);
  EXPECT_GE(c.a, 0.0);
  EXPECT_EQ(c.b, 0.0);
}

TEST(FitBeta, ConstantScores) {
  const std::vector<double> scores(50, 0.5);
  std::vector<Label> labels(50, 0);
  for (int i = 0; i < 20; ++i) labels[i] = 1;
  const auto c = fit_beta(scores, labels);
  EXPECT_EQ(c.a, 0.0);
  EXPECT_EQ(c.b, 0.0);
  EXPECT_NEAR(oracle::logistic(c.m), 21.0 / 52.0, 1e-12);
}

TEST(FitBeta, OneClass) {
  const std::vector<double> scores{0.2, 0.7};
  const std::vector<Label> labels{0, 0};
  const auto c = fit_beta(scores, labels);
  EXPECT_EQ(c.a, 1.0);
  EXPECT_EQ(c.b, 1.0);
  EXPECT_NEAR(oracle::logistic(c.m), 0.25, 1e-12);
}

TEST(LogisticNll, GradientMatchesDifferences) {
  Rng rng(27);
  Matrix design(40, 3);
  std::vector<Label> y(40);
  for (Index i = 0; i < 40; ++i) {
    design.row(i) << rng.normal(), rng.normal(), 1.0;
    y[static_cast<std::size_t>(i)] = rng.bernoulli(0.4);
  }
  Vector w(3);
  w << 0.3, -0.7, 0.2;
  Vector g(3);
  Matrix h(3, 3);
  logistic_nll(design, y, w, &g, &h);
  for (Index k = 0; k < 3; ++k) {
    Vector up = w, down = w;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    Vector gu(3), gd(3);
    const double fd = (logistic_nll(design, y, up, &gu, nullptr) -
                       logistic_nll(design, y, down, &gd, nullptr)) / 2e-6;
    EXPECT_NEAR(g[k], fd, 1e-7);
    const Vector hcol = (gu - gd) / 2e-6;
    for (Index j = 0; j < 3; ++j) EXPECT_NEAR(h(j, k), hcol[j], 1e-6);
  }
}

// Segment masses spanning dozens of orders of magnitude leave the gradient
// with a rounding floor above the fit tolerance.
TEST(LogisticNll, NewtonStopsAtNoiseFloor) {
  Rng rng(2941);
  const auto grid = std::make_shared<const ThresholdGrid>(build_threshold_grid(-2, 2, 32));
  const std::size_t n = 2000;
  Matrix design(n, 2);
  std::vector<Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const GaussianPredictive g(rng.uniform(-1.5, 1.5), rng.uniform(0.2, 0.8));
    const auto masses = segment_masses(CdfGrid::from_gaussian(grid, g));
    const double y = rng.normal(g.mean, g.stddev);
    design(static_cast<Index>(i), 0) = std::log(std::max(masses[10], kCdfClamp));
    design(static_cast<Index>(i), 1) = 1.0;
    labels[i] = grid->segment_of(y) == 10 ? 1 : 0;
  }
  const SecondOrderFunction f = [&](const Vector& w, Vector* g, Matrix* h) {
    return logistic_nll(design, labels, w, g, h);
  };
  NewtonOptions o;
  o.tolerance = 1e-10;
  o.max_iterations = 100;
  const auto r = newton_minimize(f, Vector::Zero(2), o);
  EXPECT_LT(r.iterations, 30);
  EXPECT_LT(r.gradient_norm, 1e-6);
}

}  // namespace
}  // namespace regcal
