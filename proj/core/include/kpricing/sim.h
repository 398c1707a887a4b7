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

// Episode simulation and regret accounting against the fluid upper bound.

#ifndef KPRICING_SIM_H_
#define KPRICING_SIM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "kpricing/model.h"
#include "kpricing/policy.h"

namespace kpricing {

struct StepRecord {
  int64_t t = 0;
  Vector price;
  Vector realized;  // alpha + B p + noise, before rejection and flooring
  Vector accepted;
  double revenue = 0.0;
  Vector capacity_before;
  Vector capacity_after;
  std::vector<int> rejected;
  bool stockout = false;
  // Exploration bookkeeping copied from the decision.
  Vector base_price;
  Vector target_demand;
  int perturbed_coordinate = -1;
};

struct EpisodeResult {
  int rep = 0;
  uint64_t seed = 0;
  double revenue = 0.0;
  double upper_bound = 0.0;
  double regret = 0.0;
  // sum_t (p^t)' eps^t. Prices are fixed before the noise is drawn, so this
  // has mean zero and can be removed from revenue without bias.
  double noise_revenue = 0.0;
  int64_t stockouts = 0;
  double runtime_ms = 0.0;
  // Set for the informed policy.
  std::optional<GateOutcome> gate;
  std::vector<StepRecord> trajectory;
};

struct EpisodeOptions {
  bool record_trajectory = false;
  bool measure_time = false;
};

struct Fulfillment {
  Vector accepted;
  Vector capacity;
  bool stockout = false;
};

// Serves max(requested, 0) scaled by the largest theta in [0, 1] that keeps
// A * accepted <= capacity.
Fulfillment ApplyFulfillment(const Vector& capacity, const Matrix& A,
                             const Vector& requested);

// T * r*, with r* the fluid value at rate C / T.
absl::StatusOr<double> FluidUpperBound(const Instance& instance);

// Counter-based seed derivation; replication i is reproducible alone.
uint64_t SplitSeed(uint64_t base_seed, uint64_t index);

absl::StatusOr<EpisodeResult> RunEpisode(const Instance& instance,
                                         const PolicySpec& spec, uint64_t seed,
                                         const EpisodeOptions& options = {});

enum class RegretEstimator {
  kRealized,       // T r* minus realized revenue
  kNoiseAdjusted,  // realized revenue minus noise_revenue
};

struct ReplicateOptions {
  // 0 picks std::thread::hardware_concurrency().
  int threads = 0;
  // kNoiseAdjusted rewrites each episode's revenue and regret before the
  // statistics are taken.
  RegretEstimator estimator = RegretEstimator::kRealized;
  EpisodeOptions episode;
};

struct ReplicationStats {
  int reps = 0;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  // 1.96 * std / sqrt(reps); zero with ci_defined == false when reps == 1.
  double ci95_half_width = 0.0;
  bool ci_defined = false;
  double mean_revenue = 0.0;
  double upper_bound = 0.0;
  std::optional<GateOutcome> gate;
  std::vector<uint64_t> seeds;
  // Successful episodes in seed order.
  std::vector<EpisodeResult> episodes;
  // "rep <i>: <status>" for each failed episode.
  std::vector<std::string> failures;
};

struct SampleSummary {
  double mean = 0.0;
  double stddev = 0.0;  // divisor n - 1; zero when n == 1
  double ci95_half_width = 0.0;
};
SampleSummary Summarize(const std::vector<double>& values);

// Runs `reps` episodes with seeds SplitSeed(base_seed, i). Episode failures
// are collected rather than aborting the batch; errors only if every episode
// fails or the inputs are invalid.
absl::StatusOr<ReplicationStats> Replicate(const Instance& instance,
                                           const PolicySpec& spec, int reps,
                                           uint64_t base_seed,
                                           const ReplicateOptions& options = {});

}  // namespace kpricing

#endif  // KPRICING_SIM_H_
