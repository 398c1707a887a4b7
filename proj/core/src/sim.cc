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

#include "kpricing/sim.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>
#include <utility>

#include "absl/strings/str_cat.h"
#include "kpricing/fluid.h"

namespace kpricing {

Fulfillment ApplyFulfillment(const Vector& capacity, const Matrix& A,
                             const Vector& requested) {
  const Vector floored = requested.cwiseMax(0.0);
  const Vector use = A * floored;
  double theta = 1.0;
  for (int i = 0; i < use.size(); ++i) {
    if (use(i) > capacity(i)) {
      theta = std::min(theta, std::max(capacity(i), 0.0) / use(i));
    }
  }
  Fulfillment out;
  out.stockout = theta < 1.0;
  out.accepted = theta * floored;
  out.capacity = (capacity - A * out.accepted).cwiseMax(0.0);
  return out;
}

absl::StatusOr<double> FluidUpperBound(const Instance& instance) {
  const Vector rate =
      instance.capacity / static_cast<double>(instance.horizon);
  absl::StatusOr<FluidSolution> sol =
      SolveFluid(MakeFluidProblem(instance, rate));
  if (!sol.ok()) return sol.status();
  if (!sol->optimal()) {
    return absl::FailedPreconditionError(
        "Infeasible: fluid problem at rate C/T has no feasible price");
  }
  return static_cast<double>(instance.horizon) * sol->value;
}

uint64_t SplitSeed(uint64_t base_seed, uint64_t index) {
  // splitmix64 finalizer over a Weyl sequence.
  uint64_t z = base_seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

absl::StatusOr<EpisodeResult> RunEpisode(const Instance& instance,
                                         const PolicySpec& spec, uint64_t seed,
                                         const EpisodeOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (absl::Status s = ValidateInstance(instance); !s.ok()) return s;
  absl::StatusOr<double> upper = FluidUpperBound(instance);
  if (!upper.ok()) return upper.status();
  absl::StatusOr<std::unique_ptr<Policy>> policy = MakePolicy(spec, instance);
  if (!policy.ok()) return policy.status();

  // Noise and policy randomness come from separate streams so that every
  // policy sees the same demand shocks for a given seed.
  Rng noise_rng(SplitSeed(seed, 0));
  Rng policy_rng(SplitSeed(seed, 1));

  EpisodeResult result;
  result.seed = seed;
  result.upper_bound = *upper;
  if (auto* informed = dynamic_cast<InformedResolve*>(policy->get())) {
    result.gate = informed->gate();
  }
  if (options.record_trajectory) result.trajectory.reserve(instance.horizon);

  Vector capacity = instance.capacity;
  for (int64_t t = 1; t <= instance.horizon; ++t) {
    absl::StatusOr<PolicyDecision> decision =
        (*policy)->Decide(t, capacity, policy_rng);
    if (!decision.ok()) {
      return absl::Status(decision.status().code(),
                          absl::StrCat("step ", t, ": ",
                                       decision.status().message()));
    }
    const Vector noise = SampleNoise(noise_rng, instance.model);
    const Vector realized = MeanDemand(instance.model, decision->price) + noise;
    result.noise_revenue += decision->price.dot(noise);
    Vector requested = realized;
    for (int i : decision->rejected) requested(i) = 0.0;
    Fulfillment served = ApplyFulfillment(capacity, instance.A, requested);
    const double revenue = decision->price.dot(served.accepted);
    result.revenue += revenue;
    if (served.stockout) ++result.stockouts;
    (*policy)->Learn(decision->price, realized);

    if (options.record_trajectory) {
      StepRecord rec;
      rec.t = t;
      rec.price = decision->price;
      rec.realized = realized;
      rec.accepted = served.accepted;
      rec.revenue = revenue;
      rec.capacity_before = capacity;
      rec.capacity_after = served.capacity;
      rec.rejected = decision->rejected;
      rec.stockout = served.stockout;
      rec.base_price = decision->base_price;
      rec.target_demand = decision->target_demand;
      rec.perturbed_coordinate = decision->perturbed_coordinate;
      result.trajectory.push_back(std::move(rec));
    }
    capacity = std::move(served.capacity);
  }
  result.regret = result.upper_bound - result.revenue;
  if (options.measure_time) {
    result.runtime_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  }
  return result;
}

SampleSummary Summarize(const std::vector<double>& values) {
  SampleSummary s;
  const double n = static_cast<double>(values.size());
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / (n - 1.0));
  s.ci95_half_width = 1.96 * s.stddev / std::sqrt(n);
  return s;
}

absl::StatusOr<ReplicationStats> Replicate(const Instance& instance,
                                           const PolicySpec& spec, int reps,
                                           uint64_t base_seed,
                                           const ReplicateOptions& options) {
  if (reps < 1) return absl::InvalidArgumentError("reps must be >= 1");
  if (absl::Status s = ValidateInstance(instance); !s.ok()) return s;

  std::vector<uint64_t> seeds(reps);
  for (int i = 0; i < reps; ++i) seeds[i] = SplitSeed(base_seed, i);
  std::vector<absl::StatusOr<EpisodeResult>> results(
      reps, absl::UnknownError("not run"));

  int threads = options.threads > 0
                    ? options.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, reps);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < reps; i = next++) {
      results[i] = RunEpisode(instance, spec, seeds[i], options.episode);
      if (!results[i].ok()) continue;
      results[i]->rep = i;
      if (options.estimator == RegretEstimator::kNoiseAdjusted) {
        results[i]->revenue -= results[i]->noise_revenue;
        results[i]->regret = results[i]->upper_bound - results[i]->revenue;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  ReplicationStats stats;
  stats.seeds = seeds;
  std::vector<double> regrets;
  std::vector<double> revenues;
  for (int i = 0; i < reps; ++i) {
    if (!results[i].ok()) {
      stats.failures.push_back(
          absl::StrCat("rep ", i, ": ", results[i].status().ToString()));
      continue;
    }
    regrets.push_back(results[i]->regret);
    revenues.push_back(results[i]->revenue);
    stats.episodes.push_back(*std::move(results[i]));
  }
  if (stats.episodes.empty()) {
    return absl::InternalError(absl::StrCat("all ", reps,
                                            " episodes failed; first: ",
                                            stats.failures.front()));
  }
  const SampleSummary regret = Summarize(regrets);
  stats.reps = static_cast<int>(stats.episodes.size());
  stats.mean_regret = regret.mean;
  stats.std_regret = regret.stddev;
  stats.ci95_half_width = regret.ci95_half_width;
  stats.ci_defined = stats.reps >= 2;
  stats.mean_revenue = Summarize(revenues).mean;
  stats.upper_bound = stats.episodes.front().upper_bound;
  stats.gate = stats.episodes.front().gate;
  return stats;
}

}  // namespace kpricing
