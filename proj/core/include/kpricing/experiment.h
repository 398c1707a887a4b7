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

// Experiment configuration, batch orchestration and CSV output.
//
// A configuration is a JSON document with four blocks; see README.md for the
// full schema. Parsing applies every default, so the validated form is
// complete and SerializeConfig(ParseConfig(x)) is a fixed point.

#ifndef KPRICING_EXPERIMENT_H_
#define KPRICING_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "kpricing/model.h"
#include "kpricing/policy.h"
#include "kpricing/sim.h"

namespace kpricing {

enum class BudgetKind {
  kDegenerate,  // C = T * A d*, the unconstrained optimum exactly binding
  kCapacity,    // C given directly
  kRate,        // C = T * rate
};

struct BudgetSpec {
  BudgetKind kind = BudgetKind::kDegenerate;
  Vector values;
};

struct InstanceSpec {
  Matrix A;
  Vector alpha;
  Matrix B;
  double sigma = 1.0;
  NoiseFamily noise = NoiseFamily::kGaussian;
  double lower = 0.0;
  double upper = 20.0;
  BudgetSpec budget;
};

struct PriorSpec {
  // Explicit p0; when absent p0 = discount * p*.
  std::optional<Vector> p0;
  double discount = 0.8;
  // Explicit d0; when absent d0 = f(p0) + eps0 * (1, ..., 1) / sqrt(n).
  std::optional<Vector> d0;
  // eps0 is either a constant or T^{-1/2}.
  double eps0 = 0.0;
  bool eps0_inverse_sqrt_horizon = false;
};

struct RunSpec {
  std::vector<int64_t> horizons{100};
  int reps = 100;
  uint64_t base_seed = 1;
  bool trajectory = false;
  // Per-episode wall time in the per-rep CSV; off keeps output reproducible.
  bool timing = false;
  int threads = 0;
  RegretEstimator regret = RegretEstimator::kRealized;
};

struct OutputSpec {
  std::string dir = "out";
  std::string per_rep = "per_rep.csv";
  std::string summary = "summary.csv";
  // Empty disables the file.
  std::string plot = "plot.csv";
  std::string trajectory = "trajectory.csv";
};

struct ExperimentConfig {
  InstanceSpec instance;
  std::vector<PolicyKind> policies{PolicyKind::kAlg1};
  PolicyParams params;
  std::optional<PriorSpec> prior;
  RunSpec run;
  OutputSpec output;
};

// Errors are "ParseError: ..." for malformed documents and
// "ValidationError: <key>: ..." for well-formed documents with bad values.
absl::StatusOr<ExperimentConfig> ParseConfig(std::string_view text);
std::string SerializeConfig(const ExperimentConfig& config);

// Applies SEED and THREADS from `getenv` (defaults to std::getenv).
absl::Status ApplyEnvironmentOverrides(
    ExperimentConfig& config,
    const std::function<const char*(const char*)>& getenv = {});

// The instance for horizon `horizon`. `eps0_override` replaces the prior's
// eps0 rule (used by epsilon sweeps).
absl::StatusOr<Instance> BuildInstance(
    const ExperimentConfig& config, int64_t horizon,
    std::optional<double> eps0_override = std::nullopt);

struct BatchRow {
  PolicyKind policy = PolicyKind::kAlg1;
  int64_t horizon = 0;
  std::optional<double> eps0;
  std::optional<GateOutcome> gate;
  ReplicationStats stats;
};

struct BatchResult {
  std::vector<BatchRow> rows;
  // Whether episodes carry wall-clock runtimes.
  bool timed = false;
  // Failed episodes across the batch, prefixed with policy and T.
  std::vector<std::string> failures;
};

// Every (policy, T) combination of the config.
absl::StatusOr<BatchResult> RunBatch(const ExperimentConfig& config);

// The informed policy at each eps0 (and each configured T), plus one
// no-information reference row per T run on the same seeds.
absl::StatusOr<BatchResult> SweepEpsilon(const ExperimentConfig& config,
                                         const std::vector<double>& eps0s);

// eps0 at which eps0^2 T == rho sqrt(T).
double GateBoundary(double rho, int64_t horizon);

// A grid straddling GateBoundary() without landing on it.
std::vector<double> AutoEpsilonGrid(double rho, int64_t horizon);

// "%.17g".
std::string FormatDouble(double value);

std::string FormatPerRepCsv(const BatchResult& result);
std::string FormatSummaryCsv(const BatchResult& result);
enum class PlotAxis { kHorizon, kEpsilon };
std::string FormatPlotCsv(const BatchResult& result, PlotAxis axis);
std::string FormatTrajectoryCsv(const BatchResult& result);

inline constexpr std::string_view kPerRepHeader =
    "policy,T,rep,seed,revenue,upper_bound,regret,stockouts,runtime_ms";
inline constexpr std::string_view kSummaryHeader =
    "policy,T,eps0,gate,reps,mean_regret,std_regret,ci95_lo,ci95_hi";
inline constexpr std::string_view kPlotHeader = "series,x,y,ci_lo,ci_hi";

// Writes the CSVs named in `output` under output.dir.
absl::Status WriteOutputs(const BatchResult& result, const OutputSpec& output,
                          bool trajectory, PlotAxis axis);

struct SummaryRecord {
  std::string policy;
  int64_t horizon = 0;
  std::string eps0;
  std::string gate;
  int reps = 0;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
};
absl::StatusOr<std::vector<SummaryRecord>> ParseSummaryCsv(
    std::string_view text);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int points = 0;
};

// OLS of log(regret) on log(T). Needs >= 3 points ("InsufficientData") and
// positive regrets.
absl::StatusOr<SlopeFit> FitLogLogSlope(const std::vector<double>& horizons,
                                        const std::vector<double>& regrets);

// Fits one series per policy over min_T <= T <= max_T. `eps0` drops rows
// whose nonempty eps0 column differs from it. Series with fewer than 3 points
// are skipped; a series with a repeated T (an epsilon sweep) is an error.
// A series whose fit fails (e.g. NonPositiveRegret) keeps its status.
struct SeriesSlope {
  std::string policy;
  absl::StatusOr<SlopeFit> fit;
};
absl::StatusOr<std::vector<SeriesSlope>> FitSummarySlopes(
    const std::vector<SummaryRecord>& records, double min_T, double max_T,
    std::optional<std::string> eps0 = std::nullopt);

}  // namespace kpricing

#endif  // KPRICING_EXPERIMENT_H_
