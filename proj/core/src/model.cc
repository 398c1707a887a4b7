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

#include "kpricing/model.h"

#include <cmath>
#include <string>

#include "absl/strings/str_cat.h"

namespace kpricing {
namespace {

// Relative singular-value cutoff below which B is treated as singular.
constexpr double kSingularRtol = 1e-12;

bool IsSingular(const Matrix& m) {
  if (m.rows() == 0) return false;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double smax = s(0);
  return smax == 0.0 || s(s.size() - 1) <= kSingularRtol * smax;
}

}  // namespace

double MaxSymmetricEigenvalue(const Matrix& m) {
  const Matrix sym = m + m.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

absl::Status ValidateModel(const DemandModel& model) {
  const int n = model.num_products();
  if (n == 0) return absl::InvalidArgumentError("model has no products");
  if (model.B.rows() != n || model.B.cols() != n) {
    return absl::InvalidArgumentError(
        absl::StrCat("B must be ", n, "x", n, ", got ", model.B.rows(), "x",
                     model.B.cols()));
  }
  if (!model.alpha.allFinite() || !model.B.allFinite()) {
    return absl::InvalidArgumentError("model has non-finite entries");
  }
  if (!(model.sigma >= 0.0) || !std::isfinite(model.sigma)) {
    return absl::InvalidArgumentError("sigma must be finite and >= 0");
  }
  if (IsSingular(model.B)) {
    return absl::InvalidArgumentError("Singular: B is not invertible");
  }
  const double lmax = MaxSymmetricEigenvalue(model.B);
  if (!(lmax < -kTolPd)) {
    return absl::FailedPreconditionError(absl::StrCat(
        "NotNegativeDefinite: lambda_max(B + B^T) = ", lmax, " >= ", -kTolPd));
  }
  return absl::OkStatus();
}

absl::Status ValidateInstance(const Instance& instance) {
  if (absl::Status s = ValidateModel(instance.model); !s.ok()) return s;
  const int n = instance.num_products();
  const int m = instance.num_resources();
  if (instance.A.cols() != n) {
    return absl::InvalidArgumentError(
        absl::StrCat("A must have ", n, " columns, got ", instance.A.cols()));
  }
  if (instance.capacity.size() != m) {
    return absl::InvalidArgumentError(absl::StrCat(
        "capacity must have ", m, " entries, got ", instance.capacity.size()));
  }
  if ((instance.A.array() < 0.0).any() || !instance.A.allFinite()) {
    return absl::InvalidArgumentError("A must be finite and entrywise >= 0");
  }
  if ((instance.capacity.array() < 0.0).any()) {
    return absl::InvalidArgumentError("capacity must be >= 0");
  }
  if (instance.horizon < 1) {
    return absl::InvalidArgumentError("horizon T must be >= 1");
  }
  if (!(instance.lower < instance.upper) || !std::isfinite(instance.lower) ||
      !std::isfinite(instance.upper)) {
    return absl::InvalidArgumentError("price box requires finite L < U");
  }
  if (instance.prior.has_value()) {
    const InformedPrior& prior = *instance.prior;
    if (prior.p0.size() != n || prior.d0.size() != n) {
      return absl::InvalidArgumentError("prior p0/d0 must have n entries");
    }
    if (!(prior.eps0 >= 0.0)) {
      return absl::InvalidArgumentError("prior eps0 must be >= 0");
    }
    if ((prior.p0.array() < instance.lower).any() ||
        (prior.p0.array() > instance.upper).any()) {
      return absl::InvalidArgumentError("prior p0 must lie in [L, U]^n");
    }
    if ((prior.d0.array() < 0.0).any()) {
      return absl::InvalidArgumentError("prior d0 must be >= 0");
    }
  }
  return absl::OkStatus();
}

Vector MeanDemand(const DemandModel& model, const Vector& price) {
  return model.alpha + model.B * price;
}

absl::StatusOr<Vector> InvertDemand(const DemandModel& model,
                                    const Vector& demand) {
  if (IsSingular(model.B)) {
    return absl::InvalidArgumentError("Singular: B is not invertible");
  }
  return Vector(model.B.fullPivLu().solve(demand - model.alpha));
}

double Revenue(const DemandModel& model, const Vector& price) {
  return price.dot(MeanDemand(model, price));
}

absl::StatusOr<UnconstrainedOptimum> ComputeUnconstrainedOptimum(
    const DemandModel& model) {
  if (absl::Status s = ValidateModel(model); !s.ok()) return s;
  const Matrix sym = model.B + model.B.transpose();
  UnconstrainedOptimum opt;
  // -(B + B^T) is positive definite here.
  opt.price = (-sym).llt().solve(model.alpha);
  opt.demand = MeanDemand(model, opt.price);
  opt.revenue = opt.price.dot(opt.demand);
  return opt;
}

Vector SampleNoise(Rng& rng, const DemandModel& model) {
  const int n = model.num_products();
  Vector eps(n);
  if (model.sigma == 0.0) {
    eps.setZero();
    return eps;
  }
  switch (model.noise) {
    case NoiseFamily::kGaussian: {
      std::normal_distribution<double> dist(0.0, model.sigma);
      for (int i = 0; i < n; ++i) eps(i) = dist(rng);
      break;
    }
    case NoiseFamily::kUniform: {
      const double half = std::sqrt(3.0) * model.sigma;
      std::uniform_real_distribution<double> dist(-half, half);
      for (int i = 0; i < n; ++i) eps(i) = dist(rng);
      break;
    }
  }
  return eps;
}

}  // namespace kpricing
