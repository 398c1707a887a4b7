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

#include "dual_active_set.h"

#include <cmath>
#include <limits>

namespace kpricing::internal {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative size below which the primal step direction is treated as zero.
constexpr double kNullTol = 1e-14;
constexpr double kViolationTol = 1e-12;

// Rotates columns (i, j) of `J` so that (v_i, v_j) -> (h, 0).
void RotateColumns(MatrixXd& J, VectorXd& v, int i, int j) {
  const double a = v(i);
  const double b = v(j);
  const double h = std::hypot(a, b);
  if (h == 0.0) return;
  const double c = a / h;
  const double s = b / h;
  v(i) = h;
  v(j) = 0.0;
  for (int k = 0; k < J.rows(); ++k) {
    const double ji = J(k, i);
    const double jj = J(k, j);
    J(k, i) = c * ji + s * jj;
    J(k, j) = -s * ji + c * jj;
  }
}

class Workspace {
 public:
  Workspace(const MatrixXd& hessian, const VectorXd& linear)
      : n_(static_cast<int>(linear.size())), R_(MatrixXd::Zero(n_, n_)) {
    // J J^T = H^{-1} with J = L^{-T}.
    Eigen::LLT<MatrixXd> llt(hessian);
    valid_ = llt.info() == Eigen::Success;
    const MatrixXd L = llt.matrixL();
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(
        MatrixXd::Identity(n_, n_));
    x_ = -llt.solve(linear);
  }

  bool valid() const { return valid_; }
  int size() const { return q_; }
  const VectorXd& x() const { return x_; }
  VectorXd& x() { return x_; }
  const std::vector<int>& active() const { return active_; }
  const std::vector<double>& duals() const { return u_; }

  // Primal direction z and dual direction r for entering normal `np`.
  // Returns ||d2||^2 / ||d||^2, the fraction of `np` outside the active span.
  double Directions(const VectorXd& np, VectorXd& z, VectorXd& r) {
    d_ = J_.transpose() * np;
    const int free = n_ - q_;
    z = J_.rightCols(free) * d_.tail(free);
    r.resize(q_);
    if (q_ > 0) {
      r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(
          d_.head(q_));
    }
    const double total = d_.squaredNorm();
    return total == 0.0 ? 0.0 : d_.tail(free).squaredNorm() / total;
  }

  void UpdateDuals(const VectorXd& r, double t) {
    for (int j = 0; j < q_; ++j) u_[j] -= t * r(j);
  }

  // Adds the constraint whose J^T n was last computed by Directions().
  void Add(int index, double multiplier) {
    for (int j = n_ - 1; j > q_; --j) RotateColumns(J_, d_, j - 1, j);
    R_.col(q_).head(q_ + 1) = d_.head(q_ + 1);
    active_.push_back(index);
    u_.push_back(multiplier);
    ++q_;
  }

  void Drop(int position) {
    active_.erase(active_.begin() + position);
    u_.erase(u_.begin() + position);
    for (int col = position; col < q_ - 1; ++col) R_.col(col) = R_.col(col + 1);
    R_.col(q_ - 1).setZero();
    --q_;
    // R is upper Hessenberg from `position` on; restore triangularity.
    for (int j = position; j < q_; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      const double h = std::hypot(a, b);
      if (h == 0.0) continue;
      const double c = a / h;
      const double s = b / h;
      for (int k = j; k < q_; ++k) {
        const double rj = R_(j, k);
        const double rk = R_(j + 1, k);
        R_(j, k) = c * rj + s * rk;
        R_(j + 1, k) = -s * rj + c * rk;
      }
      R_(j + 1, j) = 0.0;
      for (int k = 0; k < n_; ++k) {
        const double ji = J_(k, j);
        const double jj = J_(k, j + 1);
        J_(k, j) = c * ji + s * jj;
        J_(k, j + 1) = -s * ji + c * jj;
      }
    }
    R_.row(q_).setZero();
  }

 private:
  int n_;
  bool valid_ = false;
  int q_ = 0;
  MatrixXd J_;
  MatrixXd R_;
  VectorXd x_;
  VectorXd d_;
  std::vector<int> active_;
  std::vector<double> u_;
};

double Slack(const MatrixXd& N, const VectorXd& b, const VectorXd& x, int i) {
  return N.col(i).dot(x) - b(i);
}

double ViolationTolerance(const MatrixXd& N, const VectorXd& b,
                          const VectorXd& x, int i) {
  return kViolationTol *
         (1.0 + std::abs(b(i)) + N.col(i).lpNorm<1>() * x.lpNorm<Eigen::Infinity>());
}

}  // namespace

QpResult SolveDualActiveSet(const MatrixXd& hessian, const VectorXd& linear,
                            const MatrixXd& constraints, const VectorXd& rhs) {
  const int n = static_cast<int>(linear.size());
  const int k = static_cast<int>(constraints.cols());
  QpResult result;
  result.multipliers = VectorXd::Zero(k);

  Workspace ws(hessian, linear);
  if (!ws.valid()) {
    result.status = QpStatus::kInfeasible;
    result.x = VectorXd::Zero(n);
    return result;
  }

  std::vector<bool> is_active(k, false);
  const int max_iterations = 50 * (k + n) + 100;
  VectorXd z;
  VectorXd r;
  int iterations = 0;

  while (true) {
    // Most violated inactive constraint; lowest index wins ties.
    int entering = -1;
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
      if (is_active[i]) continue;
      const double s = Slack(constraints, rhs, ws.x(), i);
      if (s < -ViolationTolerance(constraints, rhs, ws.x(), i) && s < worst) {
        worst = s;
        entering = i;
      }
    }
    if (entering < 0) break;

    const VectorXd np = constraints.col(entering);
    double u_plus = 0.0;
    double slack = worst;
    bool added = false;
    while (!added) {
      if (++iterations > max_iterations) {
        result.status = QpStatus::kIterationLimit;
        result.x = ws.x();
        result.iterations = iterations;
        return result;
      }
      const double free_fraction = ws.Directions(np, z, r);

      // Partial step: largest move before an active multiplier hits zero.
      double t1 = kInf;
      int leaving = -1;
      for (int j = 0; j < ws.size(); ++j) {
        if (r(j) > 0.0) {
          const double ratio = ws.duals()[j] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            leaving = j;
          }
        }
      }
      // Full step: makes the entering constraint tight.
      double t2 = kInf;
      if (free_fraction > kNullTol) t2 = -slack / z.dot(np);
      const double t = std::min(t1, t2);

      if (t == kInf) {
        result.status = QpStatus::kInfeasible;
        result.x = ws.x();
        result.iterations = iterations;
        return result;
      }
      if (t2 == kInf) {
        // Dual step only.
        ws.UpdateDuals(r, t);
        u_plus += t;
        is_active[ws.active()[leaving]] = false;
        ws.Drop(leaving);
        continue;
      }
      ws.x() += t * z;
      ws.UpdateDuals(r, t);
      u_plus += t;
      if (t2 <= t1) {
        ws.Add(entering, u_plus);
        is_active[entering] = true;
        added = true;
      } else {
        is_active[ws.active()[leaving]] = false;
        ws.Drop(leaving);
        slack = Slack(constraints, rhs, ws.x(), entering);
      }
    }
  }

  result.status = QpStatus::kOptimal;
  result.x = ws.x();
  result.active = ws.active();
  for (int j = 0; j < ws.size(); ++j) {
    result.multipliers(ws.active()[j]) = ws.duals()[j];
  }
  result.iterations = iterations;
  return result;
}

}  // namespace kpricing::internal
