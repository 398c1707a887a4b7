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

// Online pricing policies. Each period the simulator calls Decide() with the
// remaining capacity and then Learn() with the posted price and the full
// realized demand. Periods are 1-based: t = 1..T.
//
//   BoundaryAttractedResolve  re-solves with the true parameters and zeroes
//                             small demand targets (full information).
//   LearningResolve           explores uniformly for n periods, then
//                             re-solves with least-squares estimates once
//                             per block of n periods and perturbs one
//                             coordinate per period (no information).
//   InformedResolve           anchors the demand curve at a prior
//                             price/demand pair, re-solves every period and
//                             perturbs away from the prior price; falls back
//                             to LearningResolve when the prior's error bound
//                             is too loose for the horizon.
//   Clairvoyant               re-solves with the true parameters, no
//                             thresholding.

#ifndef KPRICING_POLICY_H_
#define KPRICING_POLICY_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "kpricing/estimate.h"
#include "kpricing/fluid.h"
#include "kpricing/model.h"

namespace kpricing {

enum class PolicyKind { kAlg1, kAlg2, kAlg3, kClairvoyant };

// Price posted when a thresholded demand target is inverted.
enum class Alg1Mode {
  // Post f^{-1}(target) even outside the box; thresholded types still sell
  // whatever noise brings in.
  kLiteral,
  // Clip the inverted price into the box and turn thresholded types away.
  kStrictBox,
};

struct PolicyParams {
  double zeta = 1.0;    // attraction / rejection threshold scale
  double sigma0 = 1.0;  // perturbation scale
  double rho = 0.1;     // informed-prior gate tolerance
  Alg1Mode alg1_mode = Alg1Mode::kLiteral;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::kAlg1;
  PolicyParams params;
};

std::string_view PolicyName(PolicyKind kind);
std::optional<PolicyKind> ParsePolicyKind(std::string_view name);

struct PolicyDecision {
  Vector price;
  // Intended mean demand; empty during uniform exploration, when no
  // estimate exists yet.
  Vector target_demand;
  // Types whose demand is turned away this period (sorted).
  std::vector<int> rejected;
  // Types zeroed by boundary attraction (BoundaryAttractedResolve only).
  std::vector<int> thresholded;
  std::optional<FluidSolution> resolve;
  // Price before the exploration perturbation, and the perturbed coordinate
  // (-1 when the decision is unperturbed).
  Vector base_price;
  int perturbed_coordinate = -1;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual absl::StatusOr<PolicyDecision> Decide(int64_t t,
                                                const Vector& capacity,
                                                Rng& rng) = 0;
  virtual void Learn(const Vector& /*price*/, const Vector& /*demand*/) {}
  virtual PolicyKind kind() const = 0;
};

// Zeroes d_i < zeta * periods_left^{-1/2}; values on the threshold are kept.
Vector ThresholdDemand(const Vector& demand, double zeta,
                       int64_t periods_left);

enum class GateOutcome { kInformed, kFallback };
std::string_view GateName(GateOutcome gate);

// Fallback iff eps0^2 T > rho sqrt(T).
GateOutcome InformedGate(double eps0, double rho, int64_t horizon);

// 0-based coordinate for l = t mod n, with l = 0 mapped to the last product.
int InformedPerturbationCoordinate(int64_t t, int num_products);

// +1 for x >= 0, -1 otherwise.
double SignNonNegative(double x);

// max(c, 0) / (T - t + 1).
Vector ResolveRate(const Vector& capacity, int64_t horizon, int64_t t);

absl::Status ValidatePolicyParams(const PolicyParams& params);

class BoundaryAttractedResolve final : public Policy {
 public:
  BoundaryAttractedResolve(const Instance& instance, PolicyParams params);
  absl::StatusOr<PolicyDecision> Decide(int64_t t, const Vector& capacity,
                                        Rng& rng) override;
  PolicyKind kind() const override { return PolicyKind::kAlg1; }

 private:
  const Instance& instance_;
  PolicyParams params_;
};

class Clairvoyant final : public Policy {
 public:
  explicit Clairvoyant(const Instance& instance);
  absl::StatusOr<PolicyDecision> Decide(int64_t t, const Vector& capacity,
                                        Rng& rng) override;
  PolicyKind kind() const override { return PolicyKind::kClairvoyant; }

 private:
  const Instance& instance_;
};

class LearningResolve final : public Policy {
 public:
  LearningResolve(const Instance& instance, PolicyParams params);
  absl::StatusOr<PolicyDecision> Decide(int64_t t, const Vector& capacity,
                                        Rng& rng) override;
  void Learn(const Vector& price, const Vector& demand) override;
  PolicyKind kind() const override { return PolicyKind::kAlg2; }

  const RegressionState& regression() const { return regression_; }
  // Re-solved price of the current block; empty before the first block.
  const Vector& block_price() const { return block_price_; }

 private:
  void RefreshBlock(int64_t t, const Vector& capacity, Rng& rng);

  const Instance& instance_;
  PolicyParams params_;
  RegressionState regression_;
  LinearEstimate estimate_;
  Vector block_price_;      // p~^k
  Vector block_mean_;       // p-bar^{kn}
  int64_t block_start_ = 0; // kn
  bool block_reject_all_ = false;
  std::optional<FluidSolution> last_solution_;
};

class InformedResolve final : public Policy {
 public:
  // Requires instance.prior; checks that d0 exceeds the unconstrained
  // optimal demand componentwise.
  static absl::StatusOr<std::unique_ptr<InformedResolve>> Create(
      const Instance& instance, PolicyParams params);

  absl::StatusOr<PolicyDecision> Decide(int64_t t, const Vector& capacity,
                                        Rng& rng) override;
  void Learn(const Vector& price, const Vector& demand) override;
  PolicyKind kind() const override { return PolicyKind::kAlg3; }

  GateOutcome gate() const { return gate_; }
  const InformedRegressionState& regression() const { return regression_; }

 private:
  InformedResolve(const Instance& instance, PolicyParams params);

  const Instance& instance_;
  PolicyParams params_;
  GateOutcome gate_;
  std::unique_ptr<LearningResolve> fallback_;
  InformedRegressionState regression_;
};

// Checks that the prior satisfies d0 > d* componentwise.
absl::Status CheckInformedPrior(const Instance& instance);

// `instance` must outlive the returned policy.
absl::StatusOr<std::unique_ptr<Policy>> MakePolicy(const PolicySpec& spec,
                                                   const Instance& instance);

}  // namespace kpricing

#endif  // KPRICING_POLICY_H_
