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

// Online demand-parameter estimation from sufficient statistics.
//
// RegressionState accumulates the augmented design P = sum x x^T with
// x = [1; p] and per-product responses D_j = sum d_j x, so the least-squares
// fit [alpha_j; beta_j] = P^+ D_j never needs the sample history.
// InformedRegressionState does the same for the slope-only fit anchored at a
// prior price/demand pair: B_hat = H G^+ with G = sum (p - p0)(p - p0)^T and
// H = sum (d - d0)(p - p0)^T.

#ifndef KPRICING_ESTIMATE_H_
#define KPRICING_ESTIMATE_H_

#include <cstdint>

#include "kpricing/model.h"

namespace kpricing {

// Singular values below kPinvRtol * sigma_max are zeroed in pseudo-inverses.
inline constexpr double kPinvRtol = 1e-10;

// Moore-Penrose pseudo-inverse via SVD.
Matrix PseudoInverse(const Matrix& m, double rtol = kPinvRtol);

struct LinearEstimate {
  Vector alpha;
  Matrix B;
};

class RegressionState {
 public:
  explicit RegressionState(int num_products);

  void Ingest(const Vector& price, const Vector& demand);

  int64_t count() const { return count_; }
  int num_products() const { return n_; }
  // (n+1) x (n+1) design; P(0, 0) == count().
  const Matrix& design() const { return design_; }
  // Column j is D_j.
  const Matrix& responses() const { return responses_; }
  // Running mean of ingested prices; zero before the first ingest.
  const Vector& mean_price() const { return mean_price_; }

  // Least-squares (alpha_hat, B_hat); minimum-norm when P is singular.
  LinearEstimate Estimate() const;

  // lambda_min(P), clamped at zero.
  double MinEigenvalue() const;

 private:
  int n_;
  int64_t count_ = 0;
  Matrix design_;
  Matrix responses_;
  Vector mean_price_;
};

class InformedRegressionState {
 public:
  InformedRegressionState(Vector p0, Vector d0);

  void Ingest(const Vector& price, const Vector& demand);

  int64_t count() const { return count_; }
  const Matrix& gram() const { return gram_; }
  const Matrix& cross() const { return cross_; }
  const Vector& p0() const { return p0_; }
  const Vector& d0() const { return d0_; }

  // H G^+; the zero matrix when no samples have been ingested.
  Matrix Estimate() const;

 private:
  Vector p0_;
  Vector d0_;
  int64_t count_ = 0;
  Matrix gram_;
  Matrix cross_;
};

}  // namespace kpricing

#endif  // KPRICING_ESTIMATE_H_
