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

#include "regcal/base_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "regcal/error.hpp"
#include "regcal/rng.hpp"

namespace regcal {

namespace {

void check_xy(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "feature rows and target length differ");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "features and targets must be finite");
  }
}

// Pairwise squared distances scaled by 1/length_scale^2, and the matching
// isotropic RBF matrix.
void rbf_with_distances(const Matrix& x, double variance, double length_scale, Matrix& kernel,
                        Matrix& scaled_d2) {
  const Index n = x.rows();
  kernel.resize(n, n);
  scaled_d2.resize(n, n);
  const double inv = 1.0 / (length_scale * length_scale);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm() * inv;
      scaled_d2(i, j) = scaled_d2(j, i) = d2;
      kernel(i, j) = kernel(j, i) = variance * std::exp(-0.5 * d2);
    }
  }
}

constexpr double kGprLogLower[3] = {-11.512925464970229, -6.907755278982137, -13.815510557964274};
constexpr double kGprLogUpper[3] = {11.512925464970229, 6.907755278982137, 4.605170185988092};

}  // namespace

OlsModel fit_ols(const Matrix& x, const Vector& y) {
  check_xy(x, y);
  const Index n = x.rows();
  const Index d = x.cols();
  if (n <= d + 1) {
    throw Error(ErrorKind::DegenerateData,
                "OLS needs more than D+1 rows (" + std::to_string(n) + " rows, " +
                    std::to_string(d) + " features)");
  }
  Matrix design(n, d + 1);
  design.leftCols(d) = x;
  design.col(d).setOnes();

  const auto chol = cholesky(SymmetricMatrix::symmetrized(design.transpose() * design));
  const Vector beta = chol.solve(Vector(design.transpose() * y));

  OlsModel model;
  model.weights = beta.head(d);
  model.intercept = beta[d];
  const double sse = (y - design * beta).squaredNorm();
  // Degrees of freedom use the design's rank, so all-zero columns cost none.
  const Index rank = Eigen::ColPivHouseholderQR<Matrix>(design).rank();
  model.residual_std =
      std::max(std::sqrt(sse / static_cast<double>(n - rank)), kStddevFloor);
  return model;
}

BrrModel brr_posterior(const Matrix& x, const Vector& y, double alpha, double lambda) {
  check_xy(x, y);
  if (!(alpha > 0.0) || !(lambda > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "BRR precisions must be positive");
  }
  const Vector x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;

  Matrix precision = alpha * (xc.transpose() * xc);
  precision.diagonal().array() += lambda;
  const auto chol = cholesky(SymmetricMatrix::symmetrized(precision));

  BrrModel model;
  model.alpha = alpha;
  model.lambda = lambda;
  model.feature_mean = x_mean;
  model.weights = alpha * chol.solve(Vector(xc.transpose() * yc));
  model.intercept = y_mean - x_mean.dot(model.weights);
  model.posterior_covariance = chol.solve(Matrix(Matrix::Identity(x.cols(), x.cols())));
  model.posterior_covariance = 0.5 * (model.posterior_covariance +
                                      model.posterior_covariance.transpose()).eval();
  model.converged = true;
  return model;
}

BrrModel fit_brr(const Matrix& x, const Vector& y, const BrrOptions& options) {
  check_xy(x, y);
  const Index n = x.rows();
  if (n <= 1) throw Error(ErrorKind::DegenerateData, "BRR needs at least two rows");

  const Vector x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Matrix xc = x.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(SymmetricMatrix::symmetrized(xc.transpose() * xc).matrix());
  const Vector s = eig.eigenvalues().cwiseMax(0.0);
  const Matrix& v = eig.eigenvectors();
  const Vector vt_xty = v.transpose() * (xc.transpose() * yc);

  const double var_y = yc.squaredNorm() / static_cast<double>(n);
  double alpha = 1.0 / std::max(var_y, 1e-12);
  double lambda = 1.0;
  const double nd = static_cast<double>(n);

  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    // w = (X^T X + lambda/alpha I)^{-1} X^T y in the eigenbasis.
    const Vector coef = v * (vt_xty.array() / (s.array() + lambda / alpha)).matrix();
    const double gamma = (alpha * s.array() / (lambda + alpha * s.array())).sum();
    const double sse = (yc - xc * coef).squaredNorm();
    const double lambda_new =
        (gamma + 2.0 * options.lambda_shape) / (coef.squaredNorm() + 2.0 * options.lambda_rate);
    const double alpha_new = (nd - gamma + 2.0 * options.alpha_shape) / (sse + 2.0 * options.alpha_rate);
    const double d_alpha = std::abs(alpha_new - alpha) / alpha;
    const double d_lambda = std::abs(lambda_new - lambda) / lambda;
    alpha = alpha_new;
    lambda = lambda_new;
    if (d_alpha < options.tolerance && d_lambda < options.tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }

  BrrModel model = brr_posterior(x, y, alpha, lambda);
  model.iterations = iter;
  model.converged = converged;
  return model;
}

double gpr_log_marginal(const Matrix& x, const Vector& y, const Vector& log_params,
                        Vector* gradient) {
  check_xy(x, y);
  if (log_params.size() != 3) {
    throw Error(ErrorKind::DimensionMismatch, "GPR has three log hyperparameters");
  }
  const double variance = std::exp(log_params[0]);
  const double length = std::exp(log_params[1]);
  const double noise = std::exp(log_params[2]);
  const Index n = x.rows();
  const Vector yc = y.array() - y.mean();

  Matrix k_signal;
  Matrix d2;
  rbf_with_distances(x, variance, length, k_signal, d2);
  Matrix k = k_signal;
  k.diagonal().array() += noise;
  const auto chol = cholesky(SymmetricMatrix(std::move(k)));
  const Vector alpha = chol.solve(yc);
  const double value = -0.5 * yc.dot(alpha) - 0.5 * chol.log_determinant() -
                       0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  if (gradient != nullptr) {
    // d/dtheta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
    const Matrix q = alpha * alpha.transpose() - chol.solve(Matrix(Matrix::Identity(n, n)));
    gradient->resize(3);
    (*gradient)[0] = 0.5 * (q.array() * k_signal.array()).sum();
    (*gradient)[1] = 0.5 * (q.array() * k_signal.array() * d2.array()).sum();
    (*gradient)[2] = 0.5 * noise * q.trace();
  }
  return value;
}

GprModel condition_gpr(const Matrix& x, const Vector& y, const GprHyperparameters& hyper) {
  check_xy(x, y);
  if (x.rows() < 1) throw Error(ErrorKind::EmptyInput, "GPR needs training data");
  GprModel model;
  model.hyper = hyper;
  model.training_inputs = x;
  model.target_mean = y.mean();
  const Vector yc = y.array() - model.target_mean;
  Matrix k = rbf_kernel(x, x, hyper.kernel_variance,
                        Vector::Constant(x.cols(), hyper.length_scale));
  k.diagonal().array() += hyper.noise_variance;
  const auto chol = cholesky(SymmetricMatrix(std::move(k)));
  model.alpha_vector = chol.solve(yc);
  model.chol_factor = chol.lower();
  model.log_marginal = -0.5 * yc.dot(model.alpha_vector) - 0.5 * chol.log_determinant() -
                       0.5 * static_cast<double>(x.rows()) * std::log(2.0 * std::numbers::pi);
  return model;
}

GprModel fit_gpr(const Matrix& x, const Vector& y, const GprOptions& options) {
  check_xy(x, y);
  if (x.rows() < 2) throw Error(ErrorKind::DegenerateData, "GPR needs at least two rows");
  Rng rng(options.seed);
  AscentOptions ascent;
  ascent.max_iterations = options.max_iterations;
  ascent.gradient_tolerance = 1e-6;
  ascent.lower = Vector::Map(kGprLogLower, 3);
  ascent.upper = Vector::Map(kGprLogUpper, 3);

  const FirstOrderFunction objective = [&](const Vector& p, Vector* g) {
    return gpr_log_marginal(x, y, p, g);
  };

  Vector best;
  double best_value = -std::numeric_limits<double>::infinity();
  const double lo = std::log(1e-2);
  const double hi = std::log(1e2);
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Vector start(3);
    for (Index i = 0; i < 3; ++i) start[i] = rng.uniform(lo, hi);
    try {
      const auto result = gradient_ascent(objective, start, ascent);
      if (result.value > best_value) {
        best_value = result.value;
        best = result.solution;
      }
    } catch (const Error&) {
      // start was numerically infeasible; try the next one
    }
  }
  if (best.size() == 0) {
    throw Error(ErrorKind::NotPositiveDefinite, "no GPR restart produced a valid fit");
  }
  return condition_gpr(x, y, {std::exp(best[0]), std::exp(best[1]), std::exp(best[2])});
}

namespace {

struct Predictor {
  const Matrix& x;

  std::vector<GaussianPredictive> operator()(const OlsModel& m) const {
    if (x.cols() != m.weights.size()) {
      throw Error(ErrorKind::DimensionMismatch, "feature dimension does not match the OLS model");
    }
    const Vector mean = (x * m.weights).array() + m.intercept;
    std::vector<GaussianPredictive> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) out.emplace_back(mean[i], m.residual_std);
    return out;
  }

  std::vector<GaussianPredictive> operator()(const BrrModel& m) const {
    if (x.cols() != m.weights.size()) {
      throw Error(ErrorKind::DimensionMismatch, "feature dimension does not match the BRR model");
    }
    const Vector mean = (x * m.weights).array() + m.intercept;
    const Matrix xc = x.rowwise() - m.feature_mean.transpose();
    const Vector quad = ((xc * m.posterior_covariance).array() * xc.array()).rowwise().sum();
    std::vector<GaussianPredictive> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
      out.emplace_back(mean[i], std::sqrt(1.0 / m.alpha + std::max(quad[i], 0.0)));
    }
    return out;
  }

  std::vector<GaussianPredictive> operator()(const GprModel& m) const {
    if (x.cols() != m.training_inputs.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "feature dimension does not match the GPR model");
    }
    const Matrix ks = rbf_kernel(x, m.training_inputs, m.hyper.kernel_variance,
                                 Vector::Constant(x.cols(), m.hyper.length_scale));
    const Vector mean = (ks * m.alpha_vector).array() + m.target_mean;
    const Matrix v = m.chol_factor.triangularView<Eigen::Lower>().solve(ks.transpose());
    const Vector reduction = v.colwise().squaredNorm().transpose();
    std::vector<GaussianPredictive> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) {
      const double latent = std::max(m.hyper.kernel_variance - reduction[i], 0.0);
      out.emplace_back(mean[i], std::sqrt(latent + m.hyper.noise_variance));
    }
    return out;
  }
};

}  // namespace

std::vector<GaussianPredictive> predict_base(const BaseModel& model, const Matrix& x) {
  return std::visit(Predictor{x}, model);
}

GaussianPredictive predict_base(const BaseModel& model, const Vector& x) {
  const Matrix row = x.transpose();
  return predict_base(model, row).front();
}

}  // namespace regcal
