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

// Ground-truth market model: linear demand f(p) = alpha + B p with additive
// zero-mean noise, plus the problem instance that bundles it with resources.

#ifndef KPRICING_MODEL_H_
#define KPRICING_MODEL_H_

#include <cstdint>
#include <optional>
#include <random>

#include "Eigen/Dense"
#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace kpricing {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Definiteness checks require lambda_max(B + B^T) < -kTolPd.
inline constexpr double kTolPd = 1e-9;

// All randomness in an episode flows through this engine.
using Rng = std::mt19937_64;

enum class NoiseFamily {
  kGaussian,  // N(0, sigma^2) per coordinate.
  kUniform,   // U(-sqrt(3) sigma, sqrt(3) sigma), same variance.
};

struct DemandModel {
  Vector alpha;
  Matrix B;
  double sigma = 0.0;
  NoiseFamily noise = NoiseFamily::kGaussian;

  int num_products() const { return static_cast<int>(alpha.size()); }
};

// A pre-given price/demand pair with a bound on the demand estimate error:
// ||d0 - (alpha + B p0)||_2 <= eps0.
struct InformedPrior {
  Vector p0;
  Vector d0;
  double eps0 = 0.0;
};

struct Instance {
  DemandModel model;
  Matrix A;        // m x n consumption, entrywise >= 0.
  Vector capacity; // C, length m.
  int64_t horizon = 1;
  double lower = 0.0;
  double upper = 1.0;
  std::optional<InformedPrior> prior;

  int num_products() const { return model.num_products(); }
  int num_resources() const { return static_cast<int>(A.rows()); }
};

struct UnconstrainedOptimum {
  Vector price;
  Vector demand;
  double revenue = 0.0;
};

// Largest eigenvalue of M + M^T.
double MaxSymmetricEigenvalue(const Matrix& m);

// Ok iff B + B^T is negative definite (which implies B invertible).
// Errors carry "NotNegativeDefinite" or "Singular" in the message.
absl::Status ValidateModel(const DemandModel& model);

// Checks dimensions, sign constraints, the price box and the model.
absl::Status ValidateInstance(const Instance& instance);

// alpha + B p, unclipped.
Vector MeanDemand(const DemandModel& model, const Vector& price);

// p with alpha + B p = d.
absl::StatusOr<Vector> InvertDemand(const DemandModel& model,
                                    const Vector& demand);

// p^T (alpha + B p).
double Revenue(const DemandModel& model, const Vector& price);

// Stationary point p* = -(B + B^T)^{-1} alpha of the concave revenue.
absl::StatusOr<UnconstrainedOptimum> ComputeUnconstrainedOptimum(
    const DemandModel& model);

// One noise vector drawn from the model's family; deterministic given `rng`.
Vector SampleNoise(Rng& rng, const DemandModel& model);

}  // namespace kpricing

#endif  // KPRICING_MODEL_H_
