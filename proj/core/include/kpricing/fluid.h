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

// Fluid (per-period-rate) revenue maximization:
//
//   max_{p in [L,U]^n}  p^T d   s.t.  d = alpha_eff + B_eff p,  A d <= rate.
//
// The objective is strictly concave when B_eff + B_eff^T is negative
// definite, so the optimal price is unique. Solutions carry a KKT residual
// computed independently of the solver path.

#ifndef KPRICING_FLUID_H_
#define KPRICING_FLUID_H_

#include <vector>

#include "absl/status/statusor.h"
#include "kpricing/model.h"

namespace kpricing {

inline constexpr double kTolKkt = 1e-8;
inline constexpr double kTolFeas = 1e-8;

struct FluidProblem {
  Vector alpha_eff;
  Matrix B_eff;
  Matrix A;
  // Per-period budget; +infinity entries drop the corresponding row.
  Vector rate;
  double lower = 0.0;
  double upper = 1.0;

  int num_products() const { return static_cast<int>(alpha_eff.size()); }
};

enum class FluidStatus { kOptimal, kInfeasible };

struct FluidSolution {
  FluidStatus status = FluidStatus::kInfeasible;
  Vector price;
  Vector demand;
  double value = 0.0;
  // Resource rows with A d = rate within kTolFeas.
  std::vector<int> active_resources;
  // Multipliers of the resource rows. Not unique under degeneracy.
  Vector resource_duals;
  double kkt_residual = 0.0;

  bool optimal() const { return status == FluidStatus::kOptimal; }
};

// Problem with the true demand parameters at the given rate.
FluidProblem MakeFluidProblem(const Instance& instance, const Vector& rate);

// Exact solve. Errors with "NotConcave" when B_eff + B_eff^T is not negative
// definite; infeasibility is reported through the status.
absl::StatusOr<FluidSolution> SolveFluid(const FluidProblem& problem);

// Solves the problem with demand curve d = d0 + B_hat (p - p0).
absl::StatusOr<FluidSolution> SolveFluidInformed(const Vector& p0,
                                                 const Vector& d0,
                                                 const Matrix& B_hat,
                                                 const Matrix& A,
                                                 const Vector& rate,
                                                 double lower, double upper);

// Max-norm of the KKT violation at `price` (demand is recomputed from it):
// primal infeasibility, plus the stationarity residual of the best
// nonnegative multipliers on the constraints active at `price` (dual
// feasibility holds by construction), plus complementary slackness.
double KktResidual(const FluidProblem& problem, const Vector& price);

// Brute-force maximizer over a uniform grid with `resolution` points per
// price coordinate (endpoints included). Only for n <= 3; errors with
// "TooLarge" otherwise.
absl::StatusOr<FluidSolution> GridOracle(const FluidProblem& problem,
                                         int resolution);

}  // namespace kpricing

#endif  // KPRICING_FLUID_H_
