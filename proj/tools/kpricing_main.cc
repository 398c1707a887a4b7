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

// Command-line front end: run, sweep-horizon, sweep-epsilon, fit-slope.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpricing/experiment.h"

namespace {

using kpricing::BatchResult;
using kpricing::ExperimentConfig;

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.message() << "\n";
  return 1;
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path,
                                            const std::string& out_dir) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  absl::StatusOr<ExperimentConfig> config = kpricing::ParseConfig(*text);
  if (!config.ok()) return config.status();
  if (absl::Status s = kpricing::ApplyEnvironmentOverrides(*config); !s.ok()) {
    return s;
  }
  if (!out_dir.empty()) config->output.dir = out_dir;
  return config;
}

void PrintRows(const BatchResult& result) {
  for (const kpricing::BatchRow& row : result.rows) {
    std::fprintf(stderr, "%-12s T=%-6lld", std::string(kpricing::PolicyName(row.policy)).c_str(),
                 static_cast<long long>(row.horizon));
    if (row.eps0.has_value()) std::fprintf(stderr, " eps0=%-10.4g", *row.eps0);
    if (row.gate.has_value()) {
      std::fprintf(stderr, " gate=%-8s",
                   std::string(kpricing::GateName(*row.gate)).c_str());
    }
    std::fprintf(stderr, " regret=%.4f +- %.4f (reps=%d)\n",
                 row.stats.mean_regret, row.stats.ci95_half_width,
                 row.stats.reps);
  }
}

// Writes outputs; a batch with failed episodes still writes what succeeded
// but exits nonzero.
int Finish(const BatchResult& result, const ExperimentConfig& config,
           kpricing::PlotAxis axis) {
  PrintRows(result);
  if (absl::Status s = kpricing::WriteOutputs(result, config.output,
                                              config.run.trajectory, axis);
      !s.ok()) {
    return Fail(s);
  }
  std::fprintf(stderr, "wrote %s\n", config.output.dir.c_str());
  for (const std::string& f : result.failures) {
    std::cerr << "episode failed: " << f << "\n";
  }
  return result.failures.empty() ? 0 : 2;
}

absl::StatusOr<std::vector<double>> ParseDoubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      return absl::InvalidArgumentError("bad number in list: '" + item + "'");
    }
  }
  if (out.empty()) return absl::InvalidArgumentError("empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic pricing with resource constraints: simulation driver"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string horizons;
  std::string eps0_list;
  std::string summary_path;
  std::string eps0_filter;
  double min_T = 0.0;
  double max_T = 0.0;

  CLI::App* run = app.add_subcommand("run", "Run every policy and horizon of a config");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  CLI::App* sweep_h =
      app.add_subcommand("sweep-horizon", "Run the config over a list of horizons");
  sweep_h->add_option("--config", config_path, "Config file")->required();
  sweep_h->add_option("--horizons", horizons, "Comma-separated horizons")
      ->required();
  sweep_h->add_option("--out", out_dir, "Output directory");

  CLI::App* sweep_e = app.add_subcommand(
      "sweep-epsilon", "Run the informed policy over a list of eps0 values");
  sweep_e->add_option("--config", config_path, "Config file")->required();
  sweep_e->add_option("--eps0", eps0_list,
                      "Comma-separated eps0 values, or 'auto'")
      ->required();
  sweep_e->add_option("--out", out_dir, "Output directory");

  CLI::App* fit = app.add_subcommand(
      "fit-slope", "Log-log regret slope per policy from a summary CSV");
  fit->add_option("--summary", summary_path, "Summary CSV")->required();
  fit->add_option("--min-T", min_T, "Smallest horizon to include")->required();
  fit->add_option("--max-T", max_T, "Largest horizon to include")->required();
  fit->add_option("--eps0", eps0_filter,
                  "Drop rows whose eps0 column is set and differs");

  CLI11_PARSE(app, argc, argv);

  if (*run || *sweep_h) {
    absl::StatusOr<ExperimentConfig> config = LoadConfig(config_path, out_dir);
    if (!config.ok()) return Fail(config.status());
    if (*sweep_h) {
      absl::StatusOr<std::vector<double>> values = ParseDoubles(horizons);
      if (!values.ok()) return Fail(values.status());
      config->run.horizons.clear();
      for (double h : *values) {
        if (h < 1 || h != static_cast<double>(static_cast<int64_t>(h))) {
          return Fail(absl::InvalidArgumentError("horizons must be integers >= 1"));
        }
        config->run.horizons.push_back(static_cast<int64_t>(h));
      }
      // Re-validate against the new horizons (budgets and priors depend on T).
      absl::StatusOr<ExperimentConfig> checked =
          kpricing::ParseConfig(kpricing::SerializeConfig(*config));
      if (!checked.ok()) return Fail(checked.status());
    }
    absl::StatusOr<BatchResult> result = kpricing::RunBatch(*config);
    if (!result.ok()) return Fail(result.status());
    return Finish(*result, *config, kpricing::PlotAxis::kHorizon);
  }

  if (*sweep_e) {
    absl::StatusOr<ExperimentConfig> config = LoadConfig(config_path, out_dir);
    if (!config.ok()) return Fail(config.status());
    BatchResult merged;
    merged.timed = config->run.timing;
    for (int64_t horizon : config->run.horizons) {
      std::vector<double> eps0s;
      if (eps0_list == "auto") {
        eps0s = kpricing::AutoEpsilonGrid(config->params.rho, horizon);
      } else {
        absl::StatusOr<std::vector<double>> values = ParseDoubles(eps0_list);
        if (!values.ok()) return Fail(values.status());
        eps0s = *values;
      }
      ExperimentConfig single = *config;
      single.run.horizons = {horizon};
      absl::StatusOr<BatchResult> part = kpricing::SweepEpsilon(single, eps0s);
      if (!part.ok()) return Fail(part.status());
      for (auto& row : part->rows) merged.rows.push_back(std::move(row));
      for (auto& f : part->failures) merged.failures.push_back(std::move(f));
    }
    return Finish(merged, *config, kpricing::PlotAxis::kEpsilon);
  }

  absl::StatusOr<std::string> text = ReadFile(summary_path);
  if (!text.ok()) return Fail(text.status());
  absl::StatusOr<std::vector<kpricing::SummaryRecord>> records =
      kpricing::ParseSummaryCsv(*text);
  if (!records.ok()) return Fail(records.status());
  std::optional<std::string> filter;
  if (!eps0_filter.empty()) filter = eps0_filter;
  absl::StatusOr<std::vector<kpricing::SeriesSlope>> slopes =
      kpricing::FitSummarySlopes(*records, min_T, max_T, filter);
  if (!slopes.ok()) return Fail(slopes.status());
  std::printf("policy,slope,stderr_slope,intercept,points\n");
  int unfitted = 0;
  for (const kpricing::SeriesSlope& s : *slopes) {
    if (!s.fit.ok()) {
      std::fprintf(stderr, "%s: %s\n", s.policy.c_str(),
                   std::string(s.fit.status().message()).c_str());
      ++unfitted;
      continue;
    }
    std::printf("%s,%s,%s,%s,%d\n", s.policy.c_str(),
                kpricing::FormatDouble(s.fit->slope).c_str(),
                kpricing::FormatDouble(s.fit->stderr_slope).c_str(),
                kpricing::FormatDouble(s.fit->intercept).c_str(),
                s.fit->points);
  }
  return unfitted == 0 ? 0 : 2;
}
