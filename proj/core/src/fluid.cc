// Copyright 2026 The kpricing Authors
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

#include "kpricing/fluid.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "dual_active_set.h"

namespace kpricing {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gradient rows of the constraints g_k(p) <= 0, in the order
// [finite resource rows..., upper bounds..., lower bounds...].
struct ConstraintSet {
  Matrix gradients;       // one column per constraint
  Vector values;          // g_k(p)
  std::vector<int> resource_row;  // source row, or -1 for box rows
};

ConstraintSet EvaluateConstraints(const FluidProblem& problem,
                                  const Vector& price) {
  const int n = problem.num_products();
  const Vector demand = problem.alpha_eff + problem.B_eff * price;
  const Matrix AB = problem.A * problem.B_eff;
  std::vector<int> rows;
  for (int i = 0; i < problem.A.rows(); ++i) {
    if (std::isfinite(problem.rate(i))) rows.push_back(i);
  }
  const int k = static_cast<int>(rows.size()) + 2 * n;
  ConstraintSet set;
  set.gradients = Matrix::Zero(n, k);
  set.values = Vector::Zero(k);
  set.resource_row.assign(k, -1);
  int c = 0;
  for (int row : rows) {
    set.gradients.col(c) = AB.row(row).transpose();
    set.values(c) = problem.A.row(row).dot(demand) - problem.rate(row);
    set.resource_row[c] = row;
    ++c;
  }
  for (int j = 0; j < n; ++j, ++c) {
    set.gradients(j, c) = 1.0;
    set.values(c) = price(j) - problem.upper;
  }
  for (int j = 0; j < n; ++j, ++c) {
    set.gradients(j, c) = -1.0;
    set.values(c) = problem.lower - price(j);
  }
  return set;
}

// Lawson-Hanson: min ||E x - f||_2 subject to x >= 0.
Vector NonNegativeLeastSquares(const Matrix& E, const Vector& f) {
  const int k = static_cast<int>(E.cols());
  Vector x = Vector::Zero(k);
  if (k == 0) return x;
  const double tol = 1e-13 * (1.0 + E.lpNorm<Eigen::Infinity>()) *
                     (1.0 + f.lpNorm<Eigen::Infinity>());
  std::vector<bool> passive(k, false);
  for (int outer = 0; outer < 3 * k + 3; ++outer) {
    const Vector w = E.transpose() * (f - E * x);
    int best = -1;
    for (int j = 0; j < k; ++j) {
      if (!passive[j] && w(j) > tol && (best < 0 || w(j) > w(best))) best = j;
    }
    if (best < 0) break;
    passive[best] = true;
    for (int inner = 0; inner < 3 * k + 3; ++inner) {
      std::vector<int> cols;
      for (int j = 0; j < k; ++j) {
        if (passive[j]) cols.push_back(j);
      }
      Matrix Ep(E.rows(), static_cast<int>(cols.size()));
      for (size_t j = 0; j < cols.size(); ++j) Ep.col(j) = E.col(cols[j]);
      const Vector zp = Ep.completeOrthogonalDecomposition().solve(f);
      Vector z = Vector::Zero(k);
      for (size_t j = 0; j < cols.size(); ++j) z(cols[j]) = zp(j);
      bool all_positive = true;
      double step = 1.0;
      for (int j : cols) {
        if (z(j) <= 0.0) {
          all_positive = false;
          const double denom = x(j) - z(j);
          if (denom > 0.0) step = std::min(step, x(j) / denom);
        }
      }
      if (all_positive) {
        x = z;
        break;
      }
      x += step * (z - x);
      for (int j : cols) {
        if (x(j) <= tol) {
          x(j) = 0.0;
          passive[j] = false;
        }
      }
    }
  }
  return x;
}

absl::Status CheckConcave(const Matrix& B_eff) {
  const double lmax = MaxSymmetricEigenvalue(B_eff);
  if (!(lmax < -kTolPd)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "NotConcave: lambda_max(B + B^T) = ", lmax, " >= ", -kTolPd));
  }
  return absl::OkStatus();
}

absl::Status CheckShapes(const FluidProblem& problem) {
  const int n = problem.num_products();
  if (n == 0 || problem.B_eff.rows() != n || problem.B_eff.cols() != n ||
      problem.A.cols() != n || problem.rate.size() != problem.A.rows()) {
    return absl::InvalidArgumentError("fluid problem has inconsistent shapes");
  }
  if (!(problem.lower < problem.upper)) {
    return absl::InvalidArgumentError("fluid problem requires L < U");
  }
  if ((problem.rate.array() < 0.0).any() ||
      problem.rate.array().isNaN().any()) {
    return absl::InvalidArgumentError("fluid rate must be >= 0");
  }
  return absl::OkStatus();
}

double GradientScale(const FluidProblem& problem) {
  const double pmax = std::max(std::abs(problem.lower), std::abs(problem.upper));
  return 1.0 + problem.alpha_eff.lpNorm<Eigen::Infinity>() +
         problem.B_eff.lpNorm<Eigen::Infinity>() * pmax;
}

}  // namespace

FluidProblem MakeFluidProblem(const Instance& instance, const Vector& rate) {
  return FluidProblem{instance.model.alpha, instance.model.B, instance.A, rate,
                      instance.lower, instance.upper};
}

double KktResidual(const FluidProblem& problem, const Vector& price) {
  const ConstraintSet set = EvaluateConstraints(problem, price);
  double primal = 0.0;
  std::vector<int> active;
  for (int c = 0; c < set.values.size(); ++c) {
    primal = std::max(primal, set.values(c));
    if (set.values(c) >= -kTolFeas) active.push_back(c);
  }
  // Minimize phi = -revenue; grad phi + sum mu_k grad g_k = 0.
  const Vector grad_phi =
      -(problem.alpha_eff +
        (problem.B_eff + problem.B_eff.transpose()) * price);
  Matrix E(price.size(), static_cast<int>(active.size()));
  for (size_t j = 0; j < active.size(); ++j) {
    E.col(j) = set.gradients.col(active[j]);
  }
  const Vector mu = NonNegativeLeastSquares(E, -grad_phi);
  const Vector stationarity = grad_phi + E * mu;
  double complementarity = 0.0;
  for (size_t j = 0; j < active.size(); ++j) {
    complementarity += mu(j) * std::abs(set.values(active[j]));
  }
  return std::max({primal, stationarity.lpNorm<Eigen::Infinity>(),
                   complementarity});
}

absl::StatusOr<FluidSolution> SolveFluid(const FluidProblem& problem) {
  if (absl::Status s = CheckShapes(problem); !s.ok()) return s;
  if (absl::Status s = CheckConcave(problem.B_eff); !s.ok()) return s;
  const int n = problem.num_products();

  // min 0.5 p^T H p + g^T p with H = -(B + B^T), g = -alpha.
  const Matrix hessian = -(problem.B_eff + problem.B_eff.transpose());
  const Vector linear = -problem.alpha_eff;

  // Constraints in N^T p >= b form, ordered as in EvaluateConstraints.
  const Matrix AB = problem.A * problem.B_eff;
  const Vector A_alpha = problem.A * problem.alpha_eff;
  std::vector<int> rows;
  for (int i = 0; i < problem.A.rows(); ++i) {
    if (std::isfinite(problem.rate(i))) rows.push_back(i);
  }
  const int k = static_cast<int>(rows.size()) + 2 * n;
  Matrix N = Matrix::Zero(n, k);
  Vector b(k);
  int c = 0;
  for (int row : rows) {
    N.col(c) = -AB.row(row).transpose();
    b(c) = A_alpha(row) - problem.rate(row);
    ++c;
  }
  for (int j = 0; j < n; ++j, ++c) {
    N(j, c) = -1.0;
    b(c) = -problem.upper;
  }
  for (int j = 0; j < n; ++j, ++c) {
    N(j, c) = 1.0;
    b(c) = problem.lower;
  }

  const internal::QpResult qp =
      internal::SolveDualActiveSet(hessian, linear, N, b);
  FluidSolution sol;
  sol.resource_duals = Vector::Zero(problem.A.rows());
  if (qp.status == internal::QpStatus::kIterationLimit) {
    return absl::InternalError("fluid solver hit its iteration limit");
  }
  if (qp.status == internal::QpStatus::kInfeasible) {
    sol.status = FluidStatus::kInfeasible;
    return sol;
  }

  sol.status = FluidStatus::kOptimal;
  sol.price = qp.x.cwiseMax(problem.lower).cwiseMin(problem.upper);
  sol.demand = problem.alpha_eff + problem.B_eff * sol.price;
  sol.value = sol.price.dot(sol.demand);
  for (size_t j = 0; j < rows.size(); ++j) {
    sol.resource_duals(rows[j]) = qp.multipliers(static_cast<int>(j));
  }
  for (int i = 0; i < problem.A.rows(); ++i) {
    if (std::isfinite(problem.rate(i)) &&
        std::abs(problem.A.row(i).dot(sol.demand) - problem.rate(i)) <=
            kTolFeas) {
      sol.active_resources.push_back(i);
    }
  }
  sol.kkt_residual = KktResidual(problem, sol.price);
  if (sol.kkt_residual > kTolKkt * GradientScale(problem)) {
    return absl::InternalError(absl::StrCat(
        "fluid solution failed its KKT check, residual ", sol.kkt_residual));
  }
  return sol;
}

absl::StatusOr<FluidSolution> SolveFluidInformed(const Vector& p0,
                                                 const Vector& d0,
                                                 const Matrix& B_hat,
                                                 const Matrix& A,
                                                 const Vector& rate,
                                                 double lower, double upper) {
  FluidProblem problem{d0 - B_hat * p0, B_hat, A, rate, lower, upper};
  return SolveFluid(problem);
}

absl::StatusOr<FluidSolution> GridOracle(const FluidProblem& problem,
                                         int resolution) {
  if (absl::Status s = CheckShapes(problem); !s.ok()) return s;
  const int n = problem.num_products();
  if (n > 3) {
    return absl::OutOfRangeError(
        absl::StrCat("TooLarge: grid oracle supports n <= 3, got n = ", n));
  }
  if (resolution < 2) {
    return absl::InvalidArgumentError("grid resolution must be >= 2");
  }
  const int m = static_cast<int>(problem.A.rows());
  const double step = (problem.upper - problem.lower) / (resolution - 1);

  std::vector<int> index(n, 0);
  Vector price(n);
  Vector demand(n);
  Vector best_price;
  double best_value = -kInf;
  while (true) {
    for (int j = 0; j < n; ++j) price(j) = problem.lower + step * index[j];
    demand.noalias() = problem.B_eff * price;
    demand += problem.alpha_eff;
    bool feasible = true;
    for (int i = 0; i < m && feasible; ++i) {
      feasible = problem.A.row(i).dot(demand) <= problem.rate(i);
    }
    if (feasible) {
      const double value = price.dot(demand);
      if (value > best_value) {
        best_value = value;
        best_price = price;
      }
    }
    int j = 0;
    while (j < n && ++index[j] == resolution) index[j++] = 0;
    if (j == n) break;
  }

  FluidSolution sol;
  sol.resource_duals = Vector::Zero(m);
  if (best_price.size() == 0) {
    sol.status = FluidStatus::kInfeasible;
    return sol;
  }
  sol.status = FluidStatus::kOptimal;
  sol.price = best_price;
  sol.demand = problem.alpha_eff + problem.B_eff * best_price;
  sol.value = best_value;
  for (int i = 0; i < m; ++i) {
    if (std::abs(problem.A.row(i).dot(sol.demand) - problem.rate(i)) <=
        kTolFeas) {
      sol.active_resources.push_back(i);
    }
  }
  sol.kkt_residual = KktResidual(problem, sol.price);
  return sol;
}

}  // namespace kpricing
