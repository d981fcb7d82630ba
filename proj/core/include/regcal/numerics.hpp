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

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace regcal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterCap = 1e-4;

/// Dense symmetric matrix. Construction validates symmetry (relative 1e-12)
/// and a non-zero dimension.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Matrix entries, double tolerance = 1e-12);

  /// Averages `m` with its transpose first; for products like X^T X whose
  /// round-off breaks exact symmetry.
  static SymmetricMatrix symmetrized(const Matrix& m);
  static SymmetricMatrix identity(Index dim);

  const Matrix& matrix() const noexcept { return entries_; }
  Index dim() const noexcept { return entries_.rows(); }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

/// Lower-triangular factor L with L L^T = M + jitter * I.
class CholeskyFactor {
 public:
  CholeskyFactor(Matrix lower, double jitter);

  const Matrix& lower() const noexcept { return lower_; }
  double jitter() const noexcept { return jitter_; }
  Index dim() const noexcept { return lower_.rows(); }

  /// Solves (M + jitter I) x = b.
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  /// L^{-1} b.
  Matrix solve_lower(const Matrix& b) const;
  Vector solve_lower(const Vector& b) const;
  /// log det(M + jitter I).
  double log_determinant() const;

 private:
  Matrix lower_;
  double jitter_;
};

/// Factorizes m + jitter I. On failure the extra diagonal is escalated
/// 1e-10, 1e-9, ..., 1e-4 (added to `jitter`); past the cap this throws
/// NotPositiveDefinite.
CholeskyFactor cholesky(const SymmetricMatrix& m, double jitter = 0.0);

double sigmoid(double x) noexcept;
/// log(sigmoid(x)) without underflow for large |x|.
double log_sigmoid(double x) noexcept;
/// log(1 + exp(x)).
double softplus(double x) noexcept;
/// Inverse of sigmoid; throws DomainError outside (0, 1).
double logit(double p);

/// Objective for second-order minimization. Fills `gradient` and `hessian`
/// when they are non-null and always returns the value.
using SecondOrderFunction =
    std::function<double(const Vector& x, Vector* gradient, Matrix* hessian)>;
/// Objective with value and (optional) gradient.
using FirstOrderFunction = std::function<double(const Vector& x, Vector* gradient)>;

struct NewtonOptions {
  double tolerance = 1e-9;
  int max_iterations = 100;
  double armijo = 1e-4;
  int max_halvings = 60;
};

struct NewtonResult {
  Vector solution;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  /// Objective at the start point and after every accepted step.
  std::vector<double> trace;
};

/// Damped Newton with Armijo backtracking (step halving). When the iteration
/// budget runs out the best iterate is returned with converged == false.
NewtonResult newton_minimize(const SecondOrderFunction& objective, Vector start,
                             const NewtonOptions& options = {});

struct AscentOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;
  /// Stop when the value improves by less than this (relative) twice in a row.
  double value_tolerance = 1e-10;
  /// Optional box; empty vectors mean unbounded.
  Vector lower;
  Vector upper;
};

struct AscentResult {
  Vector solution;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Gradient ascent with BFGS-scaled directions, Armijo backtracking and
/// projection onto the optional box. Evaluations that throw regcal::Error
/// are treated as infeasible and shrink the step.
AscentResult gradient_ascent(const FirstOrderFunction& objective, Vector start,
                             const AscentOptions& options = {});

/// max_i |analytic_i - central_i| / (|analytic_i| + step).
double check_gradient(const FirstOrderFunction& f, const Vector& point, double step);

/// Squared-exponential kernel with one length-scale per input column:
/// variance * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2).
Matrix rbf_kernel(const Matrix& a, const Matrix& b, double variance,
                  const Vector& length_scales);

}  // namespace regcal
