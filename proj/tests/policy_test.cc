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

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>
#include <vector>

#include "gtest/gtest.h"
#include "kpricing/sim.h"
#include "test_util.h"

namespace kpricing {
namespace {

using ::kpricing::testing::TwoProductInstance;
using ::kpricing::testing::TwoProductPrior;
using ::kpricing::testing::Vec;

bool Contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

TEST(ThresholdDemand, StrictInequality) {
  // zeta / sqrt(4) = 0.5 exactly.
  const Vector out = ThresholdDemand(Vec({0.5, std::nextafter(0.5, 0.0), 3}),
                                     1.0, 4);
  EXPECT_EQ(out(0), 0.5);
  EXPECT_EQ(out(1), 0.0);
  EXPECT_EQ(out(2), 3.0);
}

TEST(InformedGate, BoundaryIsInformed) {
  // eps0^2 T = 0.25 * 16 = 4 = rho sqrt(T) with rho = 1.
  EXPECT_EQ(InformedGate(0.5, 1.0, 16), GateOutcome::kInformed);
  EXPECT_EQ(InformedGate(std::nextafter(0.5, 1.0), 1.0, 16),
            GateOutcome::kFallback);
  EXPECT_EQ(InformedGate(0.0, 0.1, 3200), GateOutcome::kInformed);
}

TEST(InformedPerturbationCoordinate, ZeroMapsToLastProduct) {
  EXPECT_EQ(InformedPerturbationCoordinate(1, 2), 0);
  EXPECT_EQ(InformedPerturbationCoordinate(2, 2), 1);
  EXPECT_EQ(InformedPerturbationCoordinate(3, 2), 0);
  EXPECT_EQ(InformedPerturbationCoordinate(3, 3), 2);
  EXPECT_EQ(InformedPerturbationCoordinate(7, 1), 0);
}

TEST(SignNonNegative, ZeroIsPositive) {
  EXPECT_EQ(SignNonNegative(0.0), 1.0);
  EXPECT_EQ(SignNonNegative(-0.0), 1.0);
  EXPECT_EQ(SignNonNegative(2.0), 1.0);
  EXPECT_EQ(SignNonNegative(-1e-300), -1.0);
}

TEST(ResolveRate, ClampsNegativeCapacity) {
  EXPECT_EQ(ResolveRate(Vec({-3, 10}), 10, 6), Vec({0, 2}));
}

TEST(ValidatePolicyParams, RejectsNonPositive) {
  EXPECT_TRUE(ValidatePolicyParams({}).ok());
  EXPECT_FALSE(ValidatePolicyParams({0.0, 1.0, 0.1}).ok());
  EXPECT_FALSE(ValidatePolicyParams({1.0, -1.0, 0.1}).ok());
  EXPECT_FALSE(ValidatePolicyParams({1.0, 1.0, 0.0}).ok());
}

TEST(PolicyName, RoundTrips) {
  for (PolicyKind kind : {PolicyKind::kAlg1, PolicyKind::kAlg2,
                          PolicyKind::kAlg3, PolicyKind::kClairvoyant}) {
    EXPECT_EQ(ParsePolicyKind(PolicyName(kind)), kind);
  }
  EXPECT_FALSE(ParsePolicyKind("alg4").has_value());
}

// With rate r binding, the two-product fluid demand is ((r+1)/2, (r-1)/2).
TEST(BoundaryAttractedResolve, LiteralModeInvertsThresholdedTarget) {
  const Instance instance = TwoProductInstance(100);
  BoundaryAttractedResolve policy(instance, {});
  Rng rng(1);
  // Last period: threshold 1, rate 2, fluid demand (1.5, 0.5).
  absl::StatusOr<PolicyDecision> d = policy.Decide(100, Vec({2}), rng);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(d->thresholded, std::vector<int>{1});
  EXPECT_TRUE(d->rejected.empty());
  EXPECT_NEAR(d->target_demand(0), 1.5, 1e-8);
  EXPECT_EQ(d->target_demand(1), 0.0);
  const Vector mean = MeanDemand(instance.model, d->price);
  EXPECT_NEAR(mean(0), 1.5, 1e-8);
  EXPECT_NEAR(mean(1), 0.0, 1e-8);
}

TEST(BoundaryAttractedResolve, StrictBoxClipsAndRejects) {
  Instance instance = TwoProductInstance(100);
  instance.upper = 12.0;
  PolicyParams params;
  params.alg1_mode = Alg1Mode::kStrictBox;
  BoundaryAttractedResolve policy(instance, params);
  Rng rng(1);
  absl::StatusOr<PolicyDecision> d = policy.Decide(100, Vec({2}), rng);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(d->rejected, std::vector<int>{1});
  EXPECT_LE(d->price.maxCoeff(), 12.0);
  EXPECT_GE(d->price.minCoeff(), 0.0);
}

TEST(BoundaryAttractedResolve, NoThresholdPostsFluidPrice) {
  const Instance instance = TwoProductInstance(100);
  BoundaryAttractedResolve policy(instance, {});
  Clairvoyant clairvoyant(instance);
  Rng rng(1);
  for (int64_t t : {1, 50, 99}) {
    const Vector c = Vec({7.0 * static_cast<double>(100 - t + 1)});
    absl::StatusOr<PolicyDecision> a = policy.Decide(t, c, rng);
    absl::StatusOr<PolicyDecision> b = clairvoyant.Decide(t, c, rng);
    ASSERT_TRUE(a.ok() && b.ok());
    EXPECT_TRUE(a->thresholded.empty());
    EXPECT_EQ(a->price, b->price);
  }
}

TEST(BoundaryAttractedResolve, InfeasibleRejectsEverything) {
  Instance instance = TwoProductInstance(10);
  instance.model.B = -0.1 * Matrix::Identity(2, 2);
  BoundaryAttractedResolve policy(instance, {});
  Rng rng(1);
  absl::StatusOr<PolicyDecision> d = policy.Decide(5, Vec({0}), rng);
  ASSERT_TRUE(d.ok());
  EXPECT_EQ(d->rejected, (std::vector<int>{0, 1}));
  EXPECT_EQ(d->price, Vec({20, 20}));
}

// Drives a policy against the true model and hands each decision to `check`
// before the demand is observed.
template <typename Policy, typename Check>
void Drive(Policy& policy, const Instance& instance, int64_t steps,
           uint64_t seed, Check check) {
  Rng noise(SplitSeed(seed, 0));
  Rng prng(SplitSeed(seed, 1));
  Vector capacity = instance.capacity;
  for (int64_t t = 1; t <= steps; ++t) {
    check(t, capacity);
    absl::StatusOr<PolicyDecision> d = policy.Decide(t, capacity, prng);
    ASSERT_TRUE(d.ok()) << d.status();
    check(t, *d);
    const Vector realized =
        MeanDemand(instance.model, d->price) + SampleNoise(noise, instance.model);
    Vector requested = realized;
    for (int i : d->rejected) requested(i) = 0.0;
    capacity = ApplyFulfillment(capacity, instance.A, requested).capacity;
    policy.Learn(d->price, realized);
  }
}

TEST(LearningResolve, ExploresUniformlyThenPerturbsOneCoordinate) {
  const Instance instance = TwoProductInstance(400);
  PolicyParams params;
  params.sigma0 = 0.7;
  LearningResolve policy(instance, params);
  LinearEstimate block_estimate;
  bool block_solved = false;
  int checked = 0;
  Drive(policy, instance, 400, 5,
        [&](int64_t t, const auto& arg) {
          using T = std::decay_t<decltype(arg)>;
          if constexpr (std::is_same_v<T, Vector>) {
            // Before Decide: the estimate a refresh at t will use.
            if (t > 2 && (t - 1) % 2 == 0) {
              block_estimate = policy.regression().Estimate();
            }
          } else {
            const PolicyDecision& d = arg;
            if (t <= 2) {
              EXPECT_EQ(d.perturbed_coordinate, -1);
              EXPECT_EQ(d.target_demand.size(), 0);
              EXPECT_GE(d.price.minCoeff(), 0.0);
              EXPECT_LE(d.price.maxCoeff(), 20.0);
              return;
            }
            if ((t - 1) % 2 == 0) block_solved = d.resolve.has_value();
            const int coord = static_cast<int>((t - 1) % 2);
            ASSERT_EQ(d.perturbed_coordinate, coord);
            const double delta = 0.7 * std::pow(static_cast<double>(t), -0.25);
            EXPECT_EQ(d.price(coord), d.base_price(coord) + delta);
            EXPECT_EQ(d.price(1 - coord), d.base_price(1 - coord));
            // Rejection: predicted demand at or below the threshold.
            const Vector predicted =
                block_estimate.alpha + block_estimate.B * d.price;
            const double thr =
                std::pow(static_cast<double>(400 - t + 1), -0.25) +
                std::pow(static_cast<double>(t), -0.25);
            const bool all = d.rejected.size() == 2;
            for (int i = 0; i < 2; ++i) {
              if (predicted(i) <= thr) {
                EXPECT_TRUE(Contains(d.rejected, i));
              }
              if (predicted(i) > thr && !all) {
                EXPECT_FALSE(Contains(d.rejected, i));
              }
            }
            (void)block_solved;
            ++checked;
          }
        });
  EXPECT_EQ(checked, 398);
}

TEST(LearningResolve, SingleProductRefreshesEveryPeriod) {
  Instance instance;
  instance.model = {Vec({10}), Matrix::Constant(1, 1, -1.0), 0.5};
  instance.A = Matrix::Ones(1, 1);
  instance.capacity = Vec({500});
  instance.horizon = 100;
  instance.upper = 20;
  LearningResolve policy(instance, {});
  int refreshes = 0;
  Drive(policy, instance, 100, 3, [&](int64_t t, const auto& arg) {
    using T = std::decay_t<decltype(arg)>;
    if constexpr (std::is_same_v<T, PolicyDecision>) {
      if (t > 1) {
        EXPECT_EQ(arg.perturbed_coordinate, 0);
        if (arg.resolve.has_value()) ++refreshes;
      }
    }
  });
  EXPECT_GT(refreshes, 90);
}

TEST(LearningResolve, UnusableEstimateSamplesTheBox) {
  const Instance instance = TwoProductInstance(100);
  LearningResolve a(instance, {});
  LearningResolve b(instance, {});
  Rng ra(1);
  Rng rb(2);
  // Demand rising with price: the least-squares slope is +I.
  for (int k = 0; k < 6; ++k) {
    const Vector p = Vec({1.0 + k, 2.0 + (k * k) % 5});
    a.Learn(p, p);
    b.Learn(p, p);
  }
  absl::StatusOr<PolicyDecision> da = a.Decide(7, Vec({600}), ra);
  absl::StatusOr<PolicyDecision> db = b.Decide(7, Vec({600}), rb);
  ASSERT_TRUE(da.ok() && db.ok());
  EXPECT_FALSE(da->resolve.has_value());
  EXPECT_GE(a.block_price().minCoeff(), 0.0);
  EXPECT_LE(a.block_price().maxCoeff(), 20.0);
  EXPECT_NE(a.block_price(), b.block_price());
}

Instance InformedInstance(int64_t T, double eps0, double sigma = 1.0) {
  Instance instance = TwoProductInstance(T, sigma);
  instance.prior = TwoProductPrior(eps0);
  return instance;
}

TEST(InformedResolve, RequiresPriorAboveOptimalDemand) {
  Instance instance = TwoProductInstance(100);
  EXPECT_FALSE(InformedResolve::Create(instance, {}).ok());
  instance.prior = TwoProductPrior(0.0);
  instance.prior->p0 *= 1.2 / 0.8;  // above p*, so f(p0) < d*
  instance.prior->d0 = MeanDemand(instance.model, instance.prior->p0);
  EXPECT_FALSE(InformedResolve::Create(instance, {}).ok());
  EXPECT_TRUE(InformedResolve::Create(InformedInstance(100, 0.0), {}).ok());
}

TEST(InformedResolve, FirstPeriodPerturbsPriorPriceUpward) {
  const Instance instance = InformedInstance(100, 0.01);
  auto policy = *InformedResolve::Create(instance, {});
  EXPECT_EQ(policy->gate(), GateOutcome::kInformed);
  Rng rng(1);
  absl::StatusOr<PolicyDecision> d = policy->Decide(1, instance.capacity, rng);
  ASSERT_TRUE(d.ok());
  // No data: B_hat = 0 is not concave, so the base is p0; sgn(0) = +1 and
  // t = 1 perturbs the first coordinate by sigma0 * 1.
  EXPECT_EQ(d->base_price, instance.prior->p0);
  EXPECT_EQ(d->perturbed_coordinate, 0);
  EXPECT_EQ(d->price(0), instance.prior->p0(0) + 1.0);
  EXPECT_EQ(d->price(1), instance.prior->p0(1));
}

TEST(InformedResolve, ExactPriorNoiselessTracksFluidOptimum) {
  const Instance instance = InformedInstance(200, 0.0, 0.0);
  auto policy = *InformedResolve::Create(instance, {});
  Vector oracle;
  Drive(*policy, instance, 20, 1, [&](int64_t t, const auto& arg) {
    using T = std::decay_t<decltype(arg)>;
    if constexpr (std::is_same_v<T, Vector>) {
      absl::StatusOr<FluidSolution> sol = SolveFluid(
          MakeFluidProblem(instance, ResolveRate(arg, instance.horizon, t)));
      ASSERT_TRUE(sol.ok());
      oracle = sol->price;
    } else {
      if (t < 3) return;
      // Two perturbations identify B exactly.
      EXPECT_TRUE(arg.resolve.has_value());
      const Vector diff = arg.base_price - oracle;
      EXPECT_LT(diff.lpNorm<Eigen::Infinity>(), 1e-6) << t;
    }
  });
}

TEST(InformedResolve, PerturbationAndRejectionContracts) {
  const Instance instance = InformedInstance(500, 0.02);
  PolicyParams params;
  params.sigma0 = 1.3;
  params.zeta = 2.0;
  auto policy = *InformedResolve::Create(instance, params);
  const Vector& p0 = instance.prior->p0;
  const Vector& d0 = instance.prior->d0;
  Matrix B_hat;
  Drive(*policy, instance, 500, 9, [&](int64_t t, const auto& arg) {
    using T = std::decay_t<decltype(arg)>;
    if constexpr (std::is_same_v<T, Vector>) {
      B_hat = policy->regression().Estimate();
    } else {
      const PolicyDecision& d = arg;
      const int l = static_cast<int>(t % 2);
      const int coord = l == 0 ? 1 : 0;
      ASSERT_EQ(d.perturbed_coordinate, coord);
      const double sign = d.base_price(coord) >= p0(coord) ? 1.0 : -1.0;
      EXPECT_EQ(d.price(coord),
                d.base_price(coord) +
                    1.3 * sign * std::pow(static_cast<double>(t), -0.25));
      EXPECT_EQ(d.price(1 - coord), d.base_price(1 - coord));
      const Vector predicted = d0 + B_hat * (d.price - p0);
      const double thr =
          2.0 * (1.0 / std::sqrt(static_cast<double>(500 - t + 1)) +
                 1.0 / std::sqrt(static_cast<double>(t)));
      const bool all = d.rejected.size() == 2;
      for (int i = 0; i < 2; ++i) {
        if (predicted(i) <= thr) {
          EXPECT_TRUE(Contains(d.rejected, i)) << t;
        }
        if (predicted(i) > thr && !all) {
          EXPECT_FALSE(Contains(d.rejected, i));
        }
      }
    }
  });
}

TEST(InformedResolve, FallbackMatchesLearningResolve) {
  const Instance instance = InformedInstance(300, 0.5);
  auto informed = *InformedResolve::Create(instance, {});
  ASSERT_EQ(informed->gate(), GateOutcome::kFallback);
  LearningResolve plain(instance, {});
  std::vector<Vector> a;
  std::vector<Vector> b;
  Drive(*informed, instance, 300, 4, [&](int64_t, const auto& arg) {
    if constexpr (std::is_same_v<std::decay_t<decltype(arg)>, PolicyDecision>) {
      a.push_back(arg.price);
    }
  });
  Drive(plain, instance, 300, 4, [&](int64_t, const auto& arg) {
    if constexpr (std::is_same_v<std::decay_t<decltype(arg)>, PolicyDecision>) {
      b.push_back(arg.price);
    }
  });
  EXPECT_EQ(a, b);
}

TEST(MakePolicy, BuildsEachKind) {
  const Instance plain = TwoProductInstance(50);
  const Instance informed = InformedInstance(50, 0.1);
  for (PolicyKind kind : {PolicyKind::kAlg1, PolicyKind::kAlg2,
                          PolicyKind::kClairvoyant}) {
    absl::StatusOr<std::unique_ptr<Policy>> p = MakePolicy({kind, {}}, plain);
    ASSERT_TRUE(p.ok());
    EXPECT_EQ((*p)->kind(), kind);
  }
  EXPECT_FALSE(MakePolicy({PolicyKind::kAlg3, {}}, plain).ok());
  EXPECT_TRUE(MakePolicy({PolicyKind::kAlg3, {}}, informed).ok());
  EXPECT_FALSE(MakePolicy({PolicyKind::kAlg1, {0.0, 1.0, 0.1}}, plain).ok());
}

}  // namespace
}  // namespace kpricing
