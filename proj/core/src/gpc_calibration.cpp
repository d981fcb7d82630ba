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

#include "regcal/gpc_calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "regcal/error.hpp"
#include "regcal/rng.hpp"

namespace regcal {

namespace {

// sigmoid(x) ~= sum_i c_i Phi(l_i x); least-squares fit on [-25, 25] with
// sum c_i = 1, max abs error 9.2e-5.
constexpr std::array<double, 5> kProbitScales = {0.3, 0.45, 0.6, 0.75, 0.9};
constexpr std::array<double, 5> kProbitWeights = {0.04087792742817727, 0.2769164010526791,
                                                  0.38848754106252087, 0.05556440515292646,
                                                  0.23815372530369627};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_likelihood(double f, Label label) {
  return label != 0 ? log_sigmoid(f) : log_sigmoid(-f);
}

double objective(const Vector& a, const Vector& f, std::span<const Label> labels) {
  double value = -0.5 * a.dot(f);
  for (Index i = 0; i < f.size(); ++i) value += log_likelihood(f[i], labels[static_cast<std::size_t>(i)]);
  return value;
}

struct LinkTerms {
  Vector grad;
  Vector w;
  Vector pi;
};

LinkTerms link_terms(const Vector& f, std::span<const Label> labels) {
  LinkTerms t{Vector(f.size()), Vector(f.size()), Vector(f.size())};
  for (Index i = 0; i < f.size(); ++i) {
    const double p = sigmoid(f[i]);
    t.pi[i] = p;
    t.grad[i] = (labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0) - p;
    t.w[i] = p * (1.0 - p);
  }
  return t;
}

// B = I + W^1/2 K W^1/2 has eigenvalues >= 1, so it is factored in place
// without jitter; only the lower triangle of the result is meaningful.
Matrix factor_b(const Matrix& k, const Vector& w_sqrt) {
  const Index n = k.rows();
  Matrix b(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) b(i, j) = w_sqrt[i] * k(i, j) * w_sqrt[j];
    b(j, j) += 1.0;
  }
  Eigen::LLT<Eigen::Ref<Matrix>, Eigen::Lower> llt(b);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::NotPositiveDefinite, "I + W^1/2 K W^1/2 is not positive definite");
  }
  return b;
}

Vector solve_b(const Matrix& lower, const Vector& rhs) {
  const auto l = lower.triangularView<Eigen::Lower>();
  return l.transpose().solve(l.solve(rhs));
}

double half_log_det(const Matrix& lower) { return lower.diagonal().array().log().sum(); }

constexpr double kLogVarianceBounds[2] = {-6.907755278982137, 6.907755278982137};  // 1e-3..1e3
constexpr double kLogLengthBounds[2] = {-4.605170185988091, 4.605170185988091};    // 1e-2..1e2

}  // namespace

TargetScaling scaling_for(const ThresholdGrid& grid) {
  const auto t = grid.thresholds();
  double mean = 0.0;
  for (double v : t) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t.size());
  return {mean, std::sqrt(var)};
}

GpcTrainingSet build_gpc_training(std::span<const CdfGrid> predicted_cdfs,
                                  std::span<const double> targets, const ThresholdGrid& grid,
                                  std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw Error(ErrorKind::InvalidArgument, "subsample cap must be >= 1");
  if (predicted_cdfs.size() != targets.size()) {
    throw Error(ErrorKind::LengthMismatch, "one predicted cdf per target is required");
  }
  if (targets.empty()) throw Error(ErrorKind::EmptyInput, "no calibration instances for GPC");
  for (const auto& q : predicted_cdfs) {
    if (!(q.grid() == grid)) throw Error(ErrorKind::GridMismatch, "cdf is not on the training grid");
  }

  const std::size_t k = grid.size();
  const std::size_t total = targets.size() * k;
  std::vector<std::size_t> rows;
  if (total > cap) {
    Rng rng(seed);
    rows = rng.sample_without_replacement(total, cap);
  } else {
    rows.resize(total);
    for (std::size_t r = 0; r < total; ++r) rows[r] = r;
  }

  GpcTrainingSet out;
  out.subsample_cap = cap;
  out.scaling = scaling_for(grid);
  out.features.resize(static_cast<Index>(rows.size()), 2);
  out.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r] / k;
    const std::size_t j = rows[r] % k;
    out.features(static_cast<Index>(r), 0) = predicted_cdfs[i][j];
    out.features(static_cast<Index>(r), 1) = out.scaling.apply(grid[j]);
    out.labels[r] = targets[i] <= grid[j] ? 1 : 0;
  }
  return out;
}

Vector GpcKernel::log_params() const {
  Vector p(1 + length_scales.size());
  p[0] = std::log(variance);
  p.tail(length_scales.size()) = length_scales.array().log();
  return p;
}

GpcKernel GpcKernel::from_log_params(const Vector& p) {
  GpcKernel k;
  k.variance = std::exp(p[0]);
  k.length_scales = p.tail(p.size() - 1).array().exp();
  return k;
}

Matrix GpcKernel::operator()(const Matrix& a, const Matrix& b) const {
  return rbf_kernel(a, b, variance, length_scales);
}

LaplaceState laplace_mode(const Matrix& k, std::span<const Label> labels,
                          const LaplaceOptions& options, const Vector* warm_a) {
  const Index n = k.rows();
  if (k.cols() != n || static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel matrix and labels disagree");
  }
  LaplaceState state;
  if (n == 0) {
    state.converged = true;
    state.chol_b.resize(0, 0);
    return state;
  }

  Vector a = (warm_a != nullptr && warm_a->size() == n) ? *warm_a : Vector::Zero(n);
  Vector f = k * a;
  double psi = objective(a, f, labels);
  LinkTerms link = link_terms(f, labels);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if ((link.grad - a).norm() <= options.tolerance) break;

    const Vector w_sqrt = link.w.array().sqrt();
    const Matrix chol = factor_b(k, w_sqrt);
    const Vector b = link.w.cwiseProduct(f) + link.grad;
    const Vector inner = solve_b(chol, w_sqrt.cwiseProduct(k * b));
    const Vector newton_a = b - w_sqrt.cwiseProduct(inner);
    const Vector delta = newton_a - a;

    double step = 1.0;
    Vector trial_a = newton_a;
    Vector trial_f = k * trial_a;
    double trial_psi = objective(trial_a, trial_f, labels);
    for (int h = 0; h < 30 && !(trial_psi >= psi); ++h) {
      step *= 0.5;
      trial_a = a + step * delta;
      trial_f = k * trial_a;
      trial_psi = objective(trial_a, trial_f, labels);
    }
    if (!(trial_psi >= psi)) break;  // stalled at working precision

    a = std::move(trial_a);
    f = std::move(trial_f);
    psi = trial_psi;
    link = link_terms(f, labels);
  }

  state.w_sqrt = link.w.array().sqrt();
  state.chol_b = factor_b(k, state.w_sqrt);
  state.gradient_norm = (link.grad - a).norm();
  state.converged = state.gradient_norm <= options.tolerance;
  state.iterations = iter;
  state.log_marginal = psi - half_log_det(state.chol_b);
  state.grad_loglik = std::move(link.grad);
  state.mode = std::move(f);
  state.a = std::move(a);
  return state;
}

double gpc_log_marginal(const GpcTrainingSet& training, const Vector& log_params, Vector* gradient,
                        const LaplaceOptions& options, Vector* warm_a) {
  const Index dims = training.features.cols();
  if (log_params.size() != dims + 1) {
    throw Error(ErrorKind::DimensionMismatch, "GPC needs one variance and one length-scale per feature");
  }
  const GpcKernel kernel = GpcKernel::from_log_params(log_params);
  const Matrix& z = training.features;
  const Matrix k = kernel(z, z);
  const LaplaceState s = laplace_mode(k, training.labels, options, warm_a);
  if (warm_a != nullptr) *warm_a = s.a;
  if (gradient == nullptr) return s.log_marginal;

  const Index n = k.rows();
  gradient->setZero(dims + 1);
  if (n == 0) return s.log_marginal;

  // Gradient of the Laplace approximation including the implicit
  // dependence of the mode on the kernel parameters.
  const auto lower = s.chol_b.triangularView<Eigen::Lower>();
  const Matrix m = lower.solve(Matrix(s.w_sqrt.asDiagonal()));
  const Matrix r = m.transpose() * m;  // W^1/2 B^-1 W^1/2
  const Matrix c = lower.solve(Matrix(s.w_sqrt.asDiagonal() * k));
  Vector third(n);
  for (Index i = 0; i < n; ++i) {
    const double p = sigmoid(s.mode[i]);
    third[i] = -p * (1.0 - p) * (1.0 - 2.0 * p);
  }
  // d log q / d f = 1/2 diag((K^-1 + W)^-1) * d^3 log p, since dW/df = -d^3 log p.
  const Vector s2 =
      0.5 * (k.diagonal() - c.colwise().squaredNorm().transpose()).cwiseProduct(third);

  const auto accumulate = [&](Index j, const Matrix& dk) {
    const double s1 = 0.5 * s.a.dot(dk * s.a) - 0.5 * (r.array() * dk.array()).sum();
    const Vector b = dk * s.grad_loglik;
    const Vector s3 = b - k * (r * b);
    (*gradient)[j] = s1 + s2.dot(s3);
  };

  accumulate(0, k);
  Matrix dk(n, n);
  for (Index d = 0; d < dims; ++d) {
    const double inv = 1.0 / (kernel.length_scales[d] * kernel.length_scales[d]);
    for (Index col = 0; col < n; ++col) {
      for (Index row = 0; row < n; ++row) {
        const double diff = z(row, d) - z(col, d);
        dk(row, col) = k(row, col) * diff * diff * inv;
      }
    }
    accumulate(d + 1, dk);
  }
  return s.log_marginal;
}

GpcModel condition_gpc(GpcTrainingSet training, const GpcKernel& kernel,
                       const LaplaceOptions& options) {
  GpcModel model;
  model.kernel = kernel;
  const Matrix k = kernel(training.features, training.features);
  model.posterior = laplace_mode(k, training.labels, options);
  model.training = std::move(training);
  return model;
}

GpcModel fit_gpc(GpcTrainingSet training, const GpcFitOptions& options) {
  if (training.size() == 0) throw Error(ErrorKind::EmptyInput, "GPC needs training data");
  const Index dims = training.features.cols();

  AscentOptions ascent;
  ascent.max_iterations = options.max_iterations;
  ascent.gradient_tolerance = options.gradient_tolerance;
  ascent.value_tolerance = 1e-8;
  ascent.lower = Vector::Constant(dims + 1, kLogLengthBounds[0]);
  ascent.upper = Vector::Constant(dims + 1, kLogLengthBounds[1]);
  ascent.lower[0] = kLogVarianceBounds[0];
  ascent.upper[0] = kLogVarianceBounds[1];

  Vector warm;
  const FirstOrderFunction lml = [&](const Vector& p, Vector* g) {
    return gpc_log_marginal(training, p, g, options.laplace, &warm);
  };

  Rng rng(options.seed);
  Vector best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Vector start = Vector::Zero(dims + 1);
    if (r > 0) {
      for (Index i = 0; i < start.size(); ++i) start[i] = rng.uniform(std::log(0.1), std::log(10.0));
    }
    warm.resize(0);
    try {
      const auto result = gradient_ascent(lml, start, ascent);
      if (result.value > best_value) {
        best_value = result.value;
        best = result.solution;
      }
    } catch (const Error&) {
      // infeasible start; keep the other restarts
    }
  }
  if (best.size() == 0) throw Error(ErrorKind::NotPositiveDefinite, "no GPC restart succeeded");
  return condition_gpc(std::move(training), GpcKernel::from_log_params(best), options.laplace);
}

std::vector<LatentMoments> predict_latent(const GpcModel& model, const Matrix& points) {
  const Index m = points.rows();
  std::vector<LatentMoments> out(static_cast<std::size_t>(m));
  const double prior = model.kernel.variance;
  if (model.training.size() == 0) {
    for (auto& o : out) o = {0.0, prior};
    return out;
  }
  const auto& post = model.posterior;
  const auto lower = post.chol_b.triangularView<Eigen::Lower>();
  constexpr Index kChunk = 2048;
  for (Index start = 0; start < m; start += kChunk) {
    const Index rows = std::min(kChunk, m - start);
    const Matrix ks = model.kernel(points.middleRows(start, rows), model.training.features);
    const Vector mean = ks * post.grad_loglik;
    const Matrix v = lower.solve(Matrix(post.w_sqrt.asDiagonal() * ks.transpose()));
    const Vector reduction = v.colwise().squaredNorm().transpose();
    for (Index i = 0; i < rows; ++i) {
      out[static_cast<std::size_t>(start + i)] = {mean[i], std::max(prior - reduction[i], 0.0)};
    }
  }
  return out;
}

double predictive_probability(double mean, double variance) {
  double p = 0.0;
  for (std::size_t i = 0; i < kProbitScales.size(); ++i) {
    const double l = kProbitScales[i];
    p += kProbitWeights[i] * normal_cdf(l * mean / std::sqrt(1.0 + l * l * variance));
  }
  return std::clamp(p, 0.0, 1.0);
}

std::vector<CdfGrid> predict_gpc_cdfs(const GpcModel& model, std::span<const CdfGrid> q_test) {
  std::vector<CdfGrid> out;
  if (q_test.empty()) return out;
  const GridPtr& grid = q_test.front().grid_ptr();
  for (const auto& q : q_test) {
    if (!(q.grid_ptr() == grid || q.grid() == *grid)) {
      throw Error(ErrorKind::GridMismatch, "batched GPC prediction needs one shared grid");
    }
  }
  const std::size_t k = grid->size();
  Matrix points(static_cast<Index>(q_test.size() * k), 2);
  for (std::size_t i = 0; i < q_test.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto row = static_cast<Index>(i * k + j);
      points(row, 0) = q_test[i][j];
      points(row, 1) = model.training.scaling.apply((*grid)[j]);
    }
  }
  const auto latent = predict_latent(model, points);
  out.reserve(q_test.size());
  std::vector<double> values(k);
  for (std::size_t i = 0; i < q_test.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& l = latent[i * k + j];
      values[j] = predictive_probability(l.mean, l.variance);
    }
    out.emplace_back(grid, monotone_project(values));
  }
  return out;
}

CdfGrid predict_gpc_cdf(const GpcModel& model, const CdfGrid& q_test) {
  return std::move(predict_gpc_cdfs(model, std::span<const CdfGrid>(&q_test, 1)).front());
}

PiecewiseDensity predict_gpc_density(const GpcModel& model, const CdfGrid& q_test) {
  return cdf_to_density(predict_gpc_cdf(model, q_test));
}

}  // namespace regcal
