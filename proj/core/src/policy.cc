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

#include "kpricing/policy.h"

#include <cmath>
#include <utility>

#include "absl/strings/str_cat.h"

namespace kpricing {
namespace {

bool IsConcave(const Matrix& B) {
  return B.allFinite() && MaxSymmetricEigenvalue(B) < -kTolPd;
}

std::vector<int> AllTypes(int n) {
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  return all;
}

// Decision used when even a zero rate leaves the re-solve infeasible.
PolicyDecision RejectEverything(const Instance& instance) {
  const int n = instance.num_products();
  PolicyDecision decision;
  decision.price = Vector::Constant(n, instance.upper);
  decision.base_price = decision.price;
  decision.target_demand = Vector::Zero(n);
  decision.rejected = AllTypes(n);
  return decision;
}

// Rejects types whose predicted demand is at or below `threshold` and fills
// in the matching target demand.
void ApplyRejection(const Vector& predicted, double threshold, bool reject_all,
                    PolicyDecision& decision) {
  const int n = static_cast<int>(predicted.size());
  decision.target_demand = predicted;
  decision.rejected.clear();
  for (int i = 0; i < n; ++i) {
    if (reject_all || predicted(i) <= threshold) {
      decision.rejected.push_back(i);
      decision.target_demand(i) = 0.0;
    }
  }
}

absl::Status AtPeriod(int64_t t, const absl::Status& status) {
  return absl::Status(status.code(),
                      absl::StrCat("period ", t, ": ", status.message()));
}

}  // namespace

std::string_view PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kAlg1:
      return "alg1";
    case PolicyKind::kAlg2:
      return "alg2";
    case PolicyKind::kAlg3:
      return "alg3";
    case PolicyKind::kClairvoyant:
      return "clairvoyant";
  }
  return "unknown";
}

std::optional<PolicyKind> ParsePolicyKind(std::string_view name) {
  for (PolicyKind kind : {PolicyKind::kAlg1, PolicyKind::kAlg2,
                          PolicyKind::kAlg3, PolicyKind::kClairvoyant}) {
    if (name == PolicyName(kind)) return kind;
  }
  return std::nullopt;
}

std::string_view GateName(GateOutcome gate) {
  return gate == GateOutcome::kInformed ? "informed" : "fallback";
}

Vector ThresholdDemand(const Vector& demand, double zeta,
                       int64_t periods_left) {
  const double threshold =
      zeta / std::sqrt(static_cast<double>(periods_left));
  Vector out = demand;
  for (int i = 0; i < out.size(); ++i) {
    if (out(i) < threshold) out(i) = 0.0;
  }
  return out;
}

GateOutcome InformedGate(double eps0, double rho, int64_t horizon) {
  const double T = static_cast<double>(horizon);
  return eps0 * eps0 * T > rho * std::sqrt(T) ? GateOutcome::kFallback
                                              : GateOutcome::kInformed;
}

int InformedPerturbationCoordinate(int64_t t, int num_products) {
  const int l = static_cast<int>(t % num_products);
  return l == 0 ? num_products - 1 : l - 1;
}

double SignNonNegative(double x) { return x >= 0.0 ? 1.0 : -1.0; }

Vector ResolveRate(const Vector& capacity, int64_t horizon, int64_t t) {
  return capacity.cwiseMax(0.0) / static_cast<double>(horizon - t + 1);
}

absl::Status ValidatePolicyParams(const PolicyParams& params) {
  if (!(params.zeta > 0.0)) {
    return absl::InvalidArgumentError("zeta must be > 0");
  }
  if (!(params.sigma0 > 0.0)) {
    return absl::InvalidArgumentError("sigma0 must be > 0");
  }
  if (!(params.rho > 0.0)) {
    return absl::InvalidArgumentError("rho must be > 0");
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------------------
// Boundary-attracted re-solve.

BoundaryAttractedResolve::BoundaryAttractedResolve(const Instance& instance,
                                                   PolicyParams params)
    : instance_(instance), params_(params) {}

absl::StatusOr<PolicyDecision> BoundaryAttractedResolve::Decide(
    int64_t t, const Vector& capacity, Rng& /*rng*/) {
  const int64_t periods_left = instance_.horizon - t + 1;
  absl::StatusOr<FluidSolution> sol = SolveFluid(MakeFluidProblem(
      instance_, ResolveRate(capacity, instance_.horizon, t)));
  if (!sol.ok()) return AtPeriod(t, sol.status());
  if (!sol->optimal()) return RejectEverything(instance_);

  PolicyDecision decision;
  decision.target_demand =
      ThresholdDemand(sol->demand, params_.zeta, periods_left);
  const double threshold =
      params_.zeta / std::sqrt(static_cast<double>(periods_left));
  for (int i = 0; i < sol->demand.size(); ++i) {
    if (sol->demand(i) < threshold) decision.thresholded.push_back(i);
  }
  if (decision.thresholded.empty()) {
    decision.price = sol->price;
  } else {
    absl::StatusOr<Vector> inverted =
        InvertDemand(instance_.model, decision.target_demand);
    if (!inverted.ok()) return AtPeriod(t, inverted.status());
    decision.price = *std::move(inverted);
    if (params_.alg1_mode == Alg1Mode::kStrictBox) {
      decision.price =
          decision.price.cwiseMax(instance_.lower).cwiseMin(instance_.upper);
      decision.rejected = decision.thresholded;
    }
  }
  decision.base_price = decision.price;
  decision.resolve = *std::move(sol);
  return decision;
}

// ---------------------------------------------------------------------------
// Clairvoyant re-solve.

Clairvoyant::Clairvoyant(const Instance& instance) : instance_(instance) {}

absl::StatusOr<PolicyDecision> Clairvoyant::Decide(int64_t t,
                                                   const Vector& capacity,
                                                   Rng& /*rng*/) {
  absl::StatusOr<FluidSolution> sol = SolveFluid(MakeFluidProblem(
      instance_, ResolveRate(capacity, instance_.horizon, t)));
  if (!sol.ok()) return AtPeriod(t, sol.status());
  if (!sol->optimal()) return RejectEverything(instance_);
  PolicyDecision decision;
  decision.price = sol->price;
  decision.base_price = sol->price;
  decision.target_demand = sol->demand;
  decision.resolve = *std::move(sol);
  return decision;
}

// ---------------------------------------------------------------------------
// Periodic-review re-solve with least-squares learning.

LearningResolve::LearningResolve(const Instance& instance, PolicyParams params)
    : instance_(instance),
      params_(params),
      regression_(instance.num_products()) {}

void LearningResolve::RefreshBlock(int64_t t, const Vector& capacity,
                                   Rng& rng) {
  const int n = instance_.num_products();
  block_start_ = ((t - 1) / n) * n;
  block_reject_all_ = false;
  last_solution_.reset();
  estimate_ = regression_.Estimate();
  bool solved = false;
  if (IsConcave(estimate_.B)) {
    FluidProblem problem{estimate_.alpha, estimate_.B, instance_.A,
                         ResolveRate(capacity, instance_.horizon, t),
                         instance_.lower, instance_.upper};
    absl::StatusOr<FluidSolution> sol = SolveFluid(problem);
    if (sol.ok() && sol->optimal()) {
      block_price_ = sol->price;
      last_solution_ = *std::move(sol);
      solved = true;
    } else if (sol.ok()) {
      // Infeasible under the estimate: keep the previous block price.
      block_reject_all_ = true;
      solved = block_price_.size() > 0;
    }
  }
  // No usable estimate: keep sampling the box, as in the opening periods.
  if (!solved) {
    std::uniform_real_distribution<double> uniform(instance_.lower,
                                                   instance_.upper);
    block_price_.resize(n);
    for (int i = 0; i < n; ++i) block_price_(i) = uniform(rng);
  }
  block_mean_ = regression_.mean_price();
}

absl::StatusOr<PolicyDecision> LearningResolve::Decide(int64_t t,
                                                       const Vector& capacity,
                                                       Rng& rng) {
  const int n = instance_.num_products();
  PolicyDecision decision;
  if (t <= n) {
    std::uniform_real_distribution<double> uniform(instance_.lower,
                                                   instance_.upper);
    decision.price.resize(n);
    for (int i = 0; i < n; ++i) decision.price(i) = uniform(rng);
    decision.base_price = decision.price;
    return decision;
  }
  if ((t - 1) % n == 0) RefreshBlock(t, capacity, rng);

  const int coord = static_cast<int>(t - block_start_ - 1);
  decision.base_price =
      regression_.mean_price() + (block_price_ - block_mean_);
  decision.price = decision.base_price;
  decision.price(coord) +=
      params_.sigma0 * std::pow(static_cast<double>(t), -0.25);
  decision.perturbed_coordinate = coord;

  const Vector predicted = estimate_.alpha + estimate_.B * decision.price;
  const double threshold =
      params_.zeta *
      (std::pow(static_cast<double>(instance_.horizon - t + 1), -0.25) +
       std::pow(static_cast<double>(t), -0.25));
  ApplyRejection(predicted, threshold, block_reject_all_, decision);
  if (t == block_start_ + 1) decision.resolve = last_solution_;
  return decision;
}

void LearningResolve::Learn(const Vector& price, const Vector& demand) {
  regression_.Ingest(price, demand);
}

// ---------------------------------------------------------------------------
// Estimate-then-select re-solve anchored at an informed prior.

absl::Status CheckInformedPrior(const Instance& instance) {
  if (!instance.prior.has_value()) {
    return absl::InvalidArgumentError("informed policy requires a prior");
  }
  absl::StatusOr<UnconstrainedOptimum> opt =
      ComputeUnconstrainedOptimum(instance.model);
  if (!opt.ok()) return opt.status();
  const Vector& d0 = instance.prior->d0;
  if (d0.size() != opt->demand.size() ||
      !(d0.array() > opt->demand.array()).all()) {
    return absl::InvalidArgumentError(
        "prior d0 must exceed the unconstrained optimal demand d* "
        "componentwise");
  }
  return absl::OkStatus();
}

InformedResolve::InformedResolve(const Instance& instance, PolicyParams params)
    : instance_(instance),
      params_(params),
      gate_(InformedGate(instance.prior->eps0, params.rho, instance.horizon)),
      regression_(instance.prior->p0, instance.prior->d0) {
  if (gate_ == GateOutcome::kFallback) {
    fallback_ = std::make_unique<LearningResolve>(instance, params);
  }
}

absl::StatusOr<std::unique_ptr<InformedResolve>> InformedResolve::Create(
    const Instance& instance, PolicyParams params) {
  if (absl::Status s = CheckInformedPrior(instance); !s.ok()) return s;
  return std::unique_ptr<InformedResolve>(
      new InformedResolve(instance, params));
}

absl::StatusOr<PolicyDecision> InformedResolve::Decide(int64_t t,
                                                       const Vector& capacity,
                                                       Rng& rng) {
  if (fallback_ != nullptr) return fallback_->Decide(t, capacity, rng);

  const int n = instance_.num_products();
  const Vector& p0 = regression_.p0();
  const Vector& d0 = regression_.d0();
  const Matrix B_hat = regression_.Estimate();

  PolicyDecision decision;
  bool reject_all = false;
  // Without a usable re-solve the base price falls back to p0, where demand
  // is known to within eps0.
  Vector base = p0;
  if (IsConcave(B_hat)) {
    absl::StatusOr<FluidSolution> sol = SolveFluidInformed(
        p0, d0, B_hat, instance_.A,
        ResolveRate(capacity, instance_.horizon, t), instance_.lower,
        instance_.upper);
    if (sol.ok() && sol->optimal()) {
      base = sol->price;
      decision.resolve = *std::move(sol);
    } else if (sol.ok()) {
      reject_all = true;
    }
  }

  const int coord = InformedPerturbationCoordinate(t, n);
  decision.base_price = base;
  decision.price = base;
  decision.price(coord) += params_.sigma0 *
                           SignNonNegative(base(coord) - p0(coord)) *
                           std::pow(static_cast<double>(t), -0.25);
  decision.perturbed_coordinate = coord;

  const Vector predicted = d0 + B_hat * (decision.price - p0);
  const double threshold =
      params_.zeta *
      (1.0 / std::sqrt(static_cast<double>(instance_.horizon - t + 1)) +
       1.0 / std::sqrt(static_cast<double>(t)));
  ApplyRejection(predicted, threshold, reject_all, decision);
  return decision;
}

void InformedResolve::Learn(const Vector& price, const Vector& demand) {
  if (fallback_ != nullptr) {
    fallback_->Learn(price, demand);
    return;
  }
  regression_.Ingest(price, demand);
}

absl::StatusOr<std::unique_ptr<Policy>> MakePolicy(const PolicySpec& spec,
                                                   const Instance& instance) {
  if (absl::Status s = ValidatePolicyParams(spec.params); !s.ok()) return s;
  switch (spec.kind) {
    case PolicyKind::kAlg1:
      return std::make_unique<BoundaryAttractedResolve>(instance, spec.params);
    case PolicyKind::kAlg2:
      return std::make_unique<LearningResolve>(instance, spec.params);
    case PolicyKind::kAlg3: {
      absl::StatusOr<std::unique_ptr<InformedResolve>> policy =
          InformedResolve::Create(instance, spec.params);
      if (!policy.ok()) return policy.status();
      return std::unique_ptr<Policy>(*std::move(policy));
    }
    case PolicyKind::kClairvoyant:
      return std::make_unique<Clairvoyant>(instance);
  }
  return absl::InvalidArgumentError("unknown policy kind");
}

}  // namespace kpricing
