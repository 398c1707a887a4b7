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

#include "kpricing/estimate.h"

#include <algorithm>
#include <utility>

namespace kpricing {

Matrix PseudoInverse(const Matrix& m, double rtol) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rtol * s(0);
  Vector inv = Vector::Zero(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

RegressionState::RegressionState(int num_products)
    : n_(num_products),
      design_(Matrix::Zero(num_products + 1, num_products + 1)),
      responses_(Matrix::Zero(num_products + 1, num_products)),
      mean_price_(Vector::Zero(num_products)) {}

void RegressionState::Ingest(const Vector& price, const Vector& demand) {
  Vector x(n_ + 1);
  x(0) = 1.0;
  x.tail(n_) = price;
  design_.noalias() += x * x.transpose();
  responses_.noalias() += x * demand.transpose();
  ++count_;
  const double w = 1.0 / static_cast<double>(count_);
  mean_price_ = (1.0 - w) * mean_price_ + w * price;
}

LinearEstimate RegressionState::Estimate() const {
  // Column j of `coef` is [alpha_j; beta_j].
  const Matrix coef = PseudoInverse(design_) * responses_;
  LinearEstimate est;
  est.alpha = coef.row(0).transpose();
  est.B = coef.bottomRows(n_).transpose();
  return est;
}

double RegressionState::MinEigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(design_, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().minCoeff());
}

InformedRegressionState::InformedRegressionState(Vector p0, Vector d0)
    : p0_(std::move(p0)),
      d0_(std::move(d0)),
      gram_(Matrix::Zero(p0_.size(), p0_.size())),
      cross_(Matrix::Zero(p0_.size(), p0_.size())) {}

void InformedRegressionState::Ingest(const Vector& price,
                                     const Vector& demand) {
  const Vector dp = price - p0_;
  gram_.noalias() += dp * dp.transpose();
  cross_.noalias() += (demand - d0_) * dp.transpose();
  ++count_;
}

Matrix InformedRegressionState::Estimate() const {
  return cross_ * PseudoInverse(gram_);
}

}  // namespace kpricing
