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

// Dense strictly convex QP with inequality constraints, solved by the
// Goldfarb-Idnani dual active-set method:
//
//   min 0.5 x^T H x + g^T x   s.t.  N^T x >= b.
//
// The dual method starts at the unconstrained minimizer and never needs a
// feasible primal point, so infeasibility falls out of the iteration.

#ifndef KPRICING_DUAL_ACTIVE_SET_H_
#define KPRICING_DUAL_ACTIVE_SET_H_

#include <vector>

#include "Eigen/Dense"

namespace kpricing::internal {

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit };

struct QpResult {
  QpStatus status = QpStatus::kInfeasible;
  Eigen::VectorXd x;
  // One multiplier per constraint column; zero when inactive.
  Eigen::VectorXd multipliers;
  std::vector<int> active;
  int iterations = 0;
};

// `hessian` must be symmetric positive definite. Constraint columns are
// scanned in index order and the most violated one enters first, ties going
// to the lowest index, so the result is deterministic.
QpResult SolveDualActiveSet(const Eigen::MatrixXd& hessian,
                            const Eigen::VectorXd& linear,
                            const Eigen::MatrixXd& constraints,
                            const Eigen::VectorXd& rhs);

}  // namespace kpricing::internal

#endif  // KPRICING_DUAL_ACTIVE_SET_H_
