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

#include "regcal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "regcal/error.hpp"

namespace regcal {

SymmetricMatrix::SymmetricMatrix(Matrix entries, double tolerance) : entries_(std::move(entries)) {
  if (entries_.rows() == 0 || entries_.rows() != entries_.cols()) {
    throw Error(ErrorKind::InvalidArgument, "symmetric matrix must be square with dim >= 1");
  }
  const Index n = entries_.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      const double a = entries_(i, j);
      const double b = entries_(j, i);
      if (!(std::abs(a - b) <= tolerance * std::max(1.0, std::max(std::abs(a), std::abs(b))))) {
        throw Error(ErrorKind::InvalidArgument,
                    "matrix is not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
}

SymmetricMatrix SymmetricMatrix::symmetrized(const Matrix& m) {
  Matrix s = 0.5 * (m + m.transpose());
  return SymmetricMatrix(std::move(s), 0.0);
}

SymmetricMatrix SymmetricMatrix::identity(Index dim) {
  return SymmetricMatrix(Matrix::Identity(dim, dim));
}

CholeskyFactor::CholeskyFactor(Matrix lower, double jitter)
    : lower_(std::move(lower)), jitter_(jitter) {}

Vector CholeskyFactor::solve(const Vector& b) const {
  Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix CholeskyFactor::solve(const Matrix& b) const {
  Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix CholeskyFactor::solve_lower(const Matrix& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

Vector CholeskyFactor::solve_lower(const Vector& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

double CholeskyFactor::log_determinant() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

namespace {

bool try_factor(const Matrix& m, double jitter, Matrix& out) {
  Matrix shifted = m;
  if (jitter != 0.0) shifted.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  return out.diagonal().allFinite() && (out.diagonal().array() > 0.0).all();
}

}  // namespace

CholeskyFactor cholesky(const SymmetricMatrix& m, double jitter) {
  if (jitter < 0.0 || !std::isfinite(jitter)) {
    throw Error(ErrorKind::InvalidArgument, "jitter must be finite and non-negative");
  }
  Matrix lower;
  if (try_factor(m.matrix(), jitter, lower)) return CholeskyFactor(std::move(lower), jitter);
  for (double extra = kJitterStart; extra <= kJitterCap * (1.0 + 1e-9); extra *= 10.0) {
    if (try_factor(m.matrix(), jitter + extra, lower)) {
      return CholeskyFactor(std::move(lower), jitter + extra);
    }
  }
  throw Error(ErrorKind::NotPositiveDefinite,
              "cholesky failed after jitter escalation to " + std::to_string(kJitterCap));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double softplus(double x) noexcept { return -log_sigmoid(-x); }

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::DomainError, "logit requires p in (0, 1), got " + std::to_string(p));
  }
  return std::log(p) - std::log1p(-p);
}

NewtonResult newton_minimize(const SecondOrderFunction& objective, Vector start,
                             const NewtonOptions& options) {
  NewtonResult result;
  const Index n = start.size();
  Vector x = std::move(start);
  Vector grad(n);
  Matrix hess(n, n);
  double value = objective(x, &grad, &hess);
  result.trace.push_back(value);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = grad.norm();
    if (gnorm <= options.tolerance) break;

    Vector direction;
    try {
      direction = -cholesky(SymmetricMatrix::symmetrized(hess)).solve(grad);
    } catch (const Error&) {
      direction = -grad;
    }
    double slope = grad.dot(direction);
    if (!(slope < 0.0) || !direction.allFinite()) {
      direction = -grad;
      slope = -gnorm * gnorm;
    }

    double step = 1.0;
    bool accepted = false;
    Vector candidate(n);
    double candidate_value = value;
    for (int h = 0; h < options.max_halvings; ++h) {
      candidate = x + step * direction;
      candidate_value = objective(candidate, nullptr, nullptr);
      if (std::isfinite(candidate_value) &&
          candidate_value <= value + options.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at working precision

    // A damped step that only moves the value by rounding means the gradient
    // has hit its noise floor.
    const bool stalled = step < 1.0 && value - candidate_value <=
                                           8.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
    x = candidate;
    value = objective(x, &grad, &hess);
    result.trace.push_back(value);
    if (stalled) {
      ++iter;
      break;
    }
  }

  result.gradient_norm = grad.norm();
  result.converged = result.gradient_norm <= options.tolerance;
  result.iterations = iter;
  result.objective = value;
  result.solution = std::move(x);
  return result;
}

namespace {

Vector project(const Vector& x, const AscentOptions& o) {
  Vector p = x;
  if (o.lower.size() == x.size()) p = p.cwiseMax(o.lower);
  if (o.upper.size() == x.size()) p = p.cwiseMin(o.upper);
  return p;
}

// Components that sit on a bound and whose descent direction points outward.
std::vector<bool> blocked(const Vector& x, const Vector& grad_min, const AscentOptions& o) {
  std::vector<bool> b(static_cast<std::size_t>(x.size()), false);
  for (Index i = 0; i < x.size(); ++i) {
    const bool at_low = o.lower.size() == x.size() && x[i] <= o.lower[i] && grad_min[i] > 0.0;
    const bool at_high = o.upper.size() == x.size() && x[i] >= o.upper[i] && grad_min[i] < 0.0;
    b[static_cast<std::size_t>(i)] = at_low || at_high;
  }
  return b;
}

}  // namespace

AscentResult gradient_ascent(const FirstOrderFunction& objective, Vector start,
                             const AscentOptions& options) {
  // Internally minimize g = -f.
  const Index n = start.size();
  AscentResult result;
  Vector x = project(start, options);
  Vector grad(n);
  double value = -objective(x, &grad);
  grad = -grad;
  result.evaluations = 1;
  Matrix inv_hess = Matrix::Identity(n, n);
  bool curvature_used = false;
  int flat_steps = 0;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const auto fixed = blocked(x, grad, options);
    Vector pg = grad;
    for (Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) pg[i] = 0.0;
    }
    if (pg.norm() <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    Vector direction = -(inv_hess * pg);
    for (Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) direction[i] = 0.0;
    }
    if (!(direction.dot(pg) < 0.0) || !direction.allFinite()) {
      inv_hess.setIdentity();
      curvature_used = false;
      direction = -pg;
    }
    // Keep single moves moderate in (typically log-) parameter space.
    const double longest = direction.cwiseAbs().maxCoeff();
    if (longest > 2.0) direction *= 2.0 / longest;

    double step = 1.0;
    bool accepted = false;
    Vector candidate;
    Vector candidate_grad(n);
    double candidate_value = value;
    for (int h = 0; h < 20; ++h) {
      candidate = project(x + step * direction, options);
      bool ok = true;
      try {
        candidate_value = -objective(candidate, &candidate_grad);
        ++result.evaluations;
      } catch (const Error&) {
        ok = false;
      }
      if (ok && std::isfinite(candidate_value) && candidate_grad.allFinite() &&
          candidate_value <= value + 1e-4 * grad.dot(candidate - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (curvature_used) {
        // Retry once along the plain gradient before giving up.
        inv_hess.setIdentity();
        curvature_used = false;
        --iter;
        continue;
      }
      break;
    }

    candidate_grad = -candidate_grad;
    const Vector s = candidate - x;
    const Vector y = candidate_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!curvature_used) inv_hess = (sy / y.squaredNorm()) * Matrix::Identity(n, n);
      curvature_used = true;
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(n, n);
      inv_hess = (eye - rho * s * y.transpose()) * inv_hess * (eye - rho * y * s.transpose()) +
                 rho * s * s.transpose();
    }
    const double improvement = value - candidate_value;
    x = candidate;
    grad = candidate_grad;
    value = candidate_value;
    if (improvement <= options.value_tolerance * (1.0 + std::abs(value))) {
      if (++flat_steps >= 2) {
        result.converged = true;
        ++iter;
        break;
      }
    } else {
      flat_steps = 0;
    }
  }

  result.iterations = iter;
  result.solution = std::move(x);
  result.value = -value;
  return result;
}

double check_gradient(const FirstOrderFunction& f, const Vector& point, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  Vector analytic(point.size());
  f(point, &analytic);
  double worst = 0.0;
  Vector probe = point;
  for (Index i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = f(probe, nullptr);
    probe[i] = point[i] - step;
    const double down = f(probe, nullptr);
    probe[i] = point[i];
    const double central = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - central) / (std::abs(analytic[i]) + step));
  }
  return worst;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double variance, const Vector& length_scales) {
  if (a.cols() != b.cols() || a.cols() != length_scales.size()) {
    throw Error(ErrorKind::DimensionMismatch, "rbf_kernel: input dimensions disagree");
  }
  // Direct differences keep K(a, a) exactly symmetric with an exact diagonal.
  const Index dims = a.cols();
  const Vector inv = length_scales.cwiseInverse();
  Matrix out(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      double d2 = 0.0;
      for (Index d = 0; d < dims; ++d) {
        const double diff = (a(i, d) - b(j, d)) * inv[d];
        d2 += diff * diff;
      }
      out(i, j) = variance * std::exp(-0.5 * d2);
    }
  }
  return out;
}

}  // namespace regcal
