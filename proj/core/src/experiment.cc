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

#include "kpricing/experiment.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <type_traits>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "nlohmann/json.hpp"

namespace kpricing {
namespace {

using json = nlohmann::json;

// The system absl keeps its own string_view type, so concatenation goes
// through these small helpers instead of StrCat.
void AppendPiece(std::string& out, std::string_view s) { out.append(s); }
void AppendPiece(std::string& out, absl::string_view s) {
  out.append(s.data(), s.size());
}
void AppendPiece(std::string& out, const std::string& s) { out.append(s); }
void AppendPiece(std::string& out, const char* s) { out.append(s); }
template <typename T>
  requires std::is_arithmetic_v<T>
void AppendPiece(std::string& out, T value) {
  if constexpr (std::is_integral_v<T>) {
    out.append(std::to_string(value));
  } else {
    out.append(FormatDouble(value));
  }
}

template <typename... Args>
void Append(std::string& out, const Args&... args) {
  (AppendPiece(out, args), ...);
}

template <typename... Args>
std::string Cat(const Args&... args) {
  std::string out;
  Append(out, args...);
  return out;
}

std::string_view Sv(absl::string_view s) { return {s.data(), s.size()}; }
absl::string_view Av(std::string_view s) { return {s.data(), s.size()}; }

constexpr std::string_view kEps0InverseSqrtToken = "T^-0.5";

absl::Status ValidationError(std::string_view key, std::string_view message) {
  return absl::InvalidArgumentError(
      Cat("ValidationError: ", key, ": ", message));
}

absl::Status ParseError(std::string_view message) {
  return absl::InvalidArgumentError(Cat("ParseError: ", message));
}

// Rejects keys outside `allowed` so that typos do not silently fall back to
// defaults.
absl::Status CheckKeys(const json& block, std::string_view prefix,
                       std::initializer_list<std::string_view> allowed) {
  for (const auto& item : block.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      return ValidationError(Cat(prefix, item.key()), "unknown key");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<Vector> ReadVector(const json& value, std::string_view key) {
  if (!value.is_array()) return ValidationError(key, "expected an array");
  Vector out(static_cast<int>(value.size()));
  for (size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      return ValidationError(key, "expected numeric entries");
    }
    out(static_cast<int>(i)) = value[i].get<double>();
  }
  if (!out.allFinite()) return ValidationError(key, "non-finite entry");
  return out;
}

// Accepts a flat row-major array with `cols` columns or a nested array.
absl::StatusOr<Matrix> ReadMatrix(const json& value, std::string_view key,
                                  int cols) {
  if (!value.is_array() || value.empty()) {
    return ValidationError(key, "expected a non-empty array");
  }
  if (value[0].is_array()) {
    const int rows = static_cast<int>(value.size());
    Matrix out(rows, cols);
    for (int r = 0; r < rows; ++r) {
      absl::StatusOr<Vector> row = ReadVector(value[r], key);
      if (!row.ok()) return row.status();
      if (row->size() != cols) {
        return ValidationError(key, Cat("row ", r, " must have ",
                                                 cols, " entries"));
      }
      out.row(r) = row->transpose();
    }
    return out;
  }
  absl::StatusOr<Vector> flat = ReadVector(value, key);
  if (!flat.ok()) return flat.status();
  if (cols == 0 || flat->size() % cols != 0) {
    return ValidationError(
        key, Cat("flat length ", flat->size(),
                          " is not a multiple of n = ", cols));
  }
  const int rows = static_cast<int>(flat->size()) / cols;
  Matrix out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out(r, c) = (*flat)(r * cols + c);
  }
  return out;
}

absl::StatusOr<double> ReadNumber(const json& block, const char* name,
                                  std::string_view key, double fallback) {
  if (!block.contains(name)) return fallback;
  const json& v = block.at(name);
  if (!v.is_number()) return ValidationError(key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) return ValidationError(key, "must be finite");
  return x;
}

absl::StatusOr<bool> ReadBool(const json& block, const char* name,
                              std::string_view key, bool fallback) {
  if (!block.contains(name)) return fallback;
  if (!block.at(name).is_boolean()) {
    return ValidationError(key, "expected true or false");
  }
  return block.at(name).get<bool>();
}

absl::StatusOr<std::string> ReadString(const json& block, const char* name,
                                       std::string_view key,
                                       std::string fallback) {
  if (!block.contains(name)) return fallback;
  if (!block.at(name).is_string()) return ValidationError(key, "expected a string");
  return block.at(name).get<std::string>();
}

json ToJson(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json ToJsonRowMajor(const Matrix& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

#define KP_ASSIGN_OR_RETURN_IMPL(tmp, lhs, expr) \
  auto tmp = (expr);                             \
  if (!tmp.ok()) return tmp.status();            \
  lhs = *std::move(tmp)
#define KP_CONCAT_INNER(a, b) a##b
#define KP_CONCAT(a, b) KP_CONCAT_INNER(a, b)
#define KP_ASSIGN_OR_RETURN(lhs, expr) \
  KP_ASSIGN_OR_RETURN_IMPL(KP_CONCAT(_status_or_, __LINE__), lhs, expr)
#define KP_RETURN_IF_ERROR(expr)                \
  do {                                          \
    if (absl::Status _s = (expr); !_s.ok()) return _s; \
  } while (0)

absl::Status ParseInstance(const json& block, InstanceSpec& spec) {
  if (!block.is_object()) return ValidationError("instance", "expected an object");
  KP_RETURN_IF_ERROR(CheckKeys(block, "instance.",
                               {"n", "m", "A", "alpha", "B", "sigma", "noise",
                                "L", "U", "budget"}));
  if (!block.contains("alpha")) return ValidationError("alpha", "missing");
  KP_ASSIGN_OR_RETURN(spec.alpha, ReadVector(block.at("alpha"), "alpha"));
  const int n = static_cast<int>(spec.alpha.size());
  if (n == 0) return ValidationError("alpha", "must be non-empty");
  if (block.contains("n")) {
    if (!block.at("n").is_number_integer() || block.at("n").get<int>() != n) {
      return ValidationError("n", "must equal the length of alpha");
    }
  }
  if (!block.contains("B")) return ValidationError("B", "missing");
  KP_ASSIGN_OR_RETURN(spec.B, ReadMatrix(block.at("B"), "B", n));
  if (spec.B.rows() != n) return ValidationError("B", "must be n x n");
  if (!block.contains("A")) return ValidationError("A", "missing");
  KP_ASSIGN_OR_RETURN(spec.A, ReadMatrix(block.at("A"), "A", n));
  const int m = static_cast<int>(spec.A.rows());
  if (block.contains("m")) {
    if (!block.at("m").is_number_integer() || block.at("m").get<int>() != m) {
      return ValidationError("m", "must equal the number of rows of A");
    }
  }
  if ((spec.A.array() < 0.0).any()) {
    return ValidationError("A", "entries must be >= 0");
  }
  KP_ASSIGN_OR_RETURN(spec.sigma, ReadNumber(block, "sigma", "sigma", 1.0));
  if (spec.sigma < 0.0) return ValidationError("sigma", "must be >= 0");
  std::string noise;
  KP_ASSIGN_OR_RETURN(noise, ReadString(block, "noise", "noise", "gaussian"));
  if (noise == "gaussian") {
    spec.noise = NoiseFamily::kGaussian;
  } else if (noise == "uniform") {
    spec.noise = NoiseFamily::kUniform;
  } else {
    return ValidationError("noise", "must be \"gaussian\" or \"uniform\"");
  }
  KP_ASSIGN_OR_RETURN(spec.lower, ReadNumber(block, "L", "L", 0.0));
  KP_ASSIGN_OR_RETURN(spec.upper, ReadNumber(block, "U", "U", 20.0));
  if (!(spec.lower < spec.upper)) return ValidationError("U", "must exceed L");

  DemandModel model{spec.alpha, spec.B, spec.sigma, spec.noise};
  if (absl::Status s = ValidateModel(model); !s.ok()) {
    return ValidationError("B", Sv(s.message()));
  }

  spec.budget = BudgetSpec{};
  if (block.contains("budget")) {
    const json& b = block.at("budget");
    if (b.is_string()) {
      if (b.get<std::string>() != "degenerate") {
        return ValidationError("budget", "string form must be \"degenerate\"");
      }
    } else if (b.is_array()) {
      spec.budget.kind = BudgetKind::kCapacity;
      KP_ASSIGN_OR_RETURN(spec.budget.values, ReadVector(b, "budget"));
    } else if (b.is_object() && b.size() == 1 &&
               (b.contains("capacity") || b.contains("rate"))) {
      const bool capacity = b.contains("capacity");
      spec.budget.kind = capacity ? BudgetKind::kCapacity : BudgetKind::kRate;
      KP_ASSIGN_OR_RETURN(
          spec.budget.values,
          ReadVector(b.at(capacity ? "capacity" : "rate"), "budget"));
    } else {
      return ValidationError(
          "budget",
          "expected \"degenerate\", an array, {\"capacity\": [...]} or "
          "{\"rate\": [...]}");
    }
    if (spec.budget.kind != BudgetKind::kDegenerate &&
        spec.budget.values.size() != m) {
      return ValidationError("budget", Cat("must have m = ", m,
                                                    " entries"));
    }
    if ((spec.budget.values.array() < 0.0).any()) {
      return ValidationError("budget", "entries must be >= 0");
    }
  }
  return absl::OkStatus();
}

absl::Status ParsePrior(const json& block, int n, PriorSpec& prior) {
  if (!block.is_object()) return ValidationError("prior", "expected an object");
  KP_RETURN_IF_ERROR(
      CheckKeys(block, "prior.", {"p0", "discount", "d0", "eps0"}));
  if (block.contains("p0")) {
    const json& p0 = block.at("p0");
    if (p0.is_string()) {
      if (p0.get<std::string>() != "discount") {
        return ValidationError("p0", "string form must be \"discount\"");
      }
    } else {
      KP_ASSIGN_OR_RETURN(prior.p0, ReadVector(p0, "p0"));
      if (prior.p0->size() != n) return ValidationError("p0", "must have n entries");
    }
  }
  KP_ASSIGN_OR_RETURN(prior.discount,
                      ReadNumber(block, "discount", "discount", 0.8));
  if (!(prior.discount > 0.0)) {
    return ValidationError("discount", "must be > 0");
  }
  if (block.contains("d0")) {
    KP_ASSIGN_OR_RETURN(prior.d0, ReadVector(block.at("d0"), "d0"));
    if (prior.d0->size() != n) return ValidationError("d0", "must have n entries");
  }
  if (block.contains("eps0")) {
    const json& e = block.at("eps0");
    if (e.is_string()) {
      if (e.get<std::string>() != kEps0InverseSqrtToken) {
        return ValidationError("eps0", "string form must be \"T^-0.5\"");
      }
      prior.eps0_inverse_sqrt_horizon = true;
    } else if (e.is_number()) {
      prior.eps0 = e.get<double>();
      if (!(prior.eps0 >= 0.0)) return ValidationError("eps0", "must be >= 0");
    } else {
      return ValidationError("eps0", "expected a number or \"T^-0.5\"");
    }
  }
  return absl::OkStatus();
}

absl::Status ParsePolicy(const json& block, ExperimentConfig& config) {
  if (!block.is_object()) return ValidationError("policy", "expected an object");
  KP_RETURN_IF_ERROR(CheckKeys(block, "policy.",
                               {"name", "zeta", "sigma0", "rho", "prior"}));
  if (block.contains("name")) {
    const json& name = block.at("name");
    std::vector<std::string> names;
    if (name.is_string()) {
      names.push_back(name.get<std::string>());
    } else if (name.is_array() && !name.empty()) {
      for (const json& item : name) {
        if (!item.is_string()) return ValidationError("name", "expected strings");
        names.push_back(item.get<std::string>());
      }
    } else {
      return ValidationError("name", "expected a policy name or a list");
    }
    config.policies.clear();
    for (const std::string& s : names) {
      std::optional<PolicyKind> kind = ParsePolicyKind(s);
      if (!kind.has_value()) {
        return ValidationError(
            "name", Cat("unknown policy \"", s,
                                 "\" (alg1, alg2, alg3, clairvoyant)"));
      }
      config.policies.push_back(*kind);
    }
  }
  KP_ASSIGN_OR_RETURN(config.params.zeta,
                      ReadNumber(block, "zeta", "zeta", 1.0));
  KP_ASSIGN_OR_RETURN(config.params.sigma0,
                      ReadNumber(block, "sigma0", "sigma0", 1.0));
  KP_ASSIGN_OR_RETURN(config.params.rho, ReadNumber(block, "rho", "rho", 0.1));
  if (!(config.params.zeta > 0.0)) return ValidationError("zeta", "must be > 0");
  if (!(config.params.sigma0 > 0.0)) {
    return ValidationError("sigma0", "must be > 0");
  }
  if (!(config.params.rho > 0.0)) return ValidationError("rho", "must be > 0");
  if (block.contains("prior")) {
    PriorSpec prior;
    KP_RETURN_IF_ERROR(ParsePrior(block.at("prior"),
                                  static_cast<int>(config.instance.alpha.size()),
                                  prior));
    config.prior = prior;
  }
  return absl::OkStatus();
}

absl::Status ParseRun(const json& block, ExperimentConfig& config) {
  if (!block.is_object()) return ValidationError("run", "expected an object");
  KP_RETURN_IF_ERROR(CheckKeys(block, "run.",
                               {"T", "reps", "base_seed", "trajectory",
                                "timing", "threads", "alg1_mode", "regret"}));
  RunSpec& run = config.run;
  if (block.contains("T")) {
    const json& t = block.at("T");
    run.horizons.clear();
    if (t.is_number_integer()) {
      run.horizons.push_back(t.get<int64_t>());
    } else if (t.is_array() && !t.empty()) {
      for (const json& item : t) {
        if (!item.is_number_integer()) {
          return ValidationError("T", "expected integer horizons");
        }
        run.horizons.push_back(item.get<int64_t>());
      }
    } else {
      return ValidationError("T", "expected an integer or a list of integers");
    }
    for (int64_t h : run.horizons) {
      if (h < 1) return ValidationError("T", "horizons must be >= 1");
    }
  }
  if (block.contains("reps")) {
    if (!block.at("reps").is_number_integer() ||
        block.at("reps").get<int64_t>() < 1) {
      return ValidationError("reps", "must be an integer >= 1");
    }
    run.reps = block.at("reps").get<int>();
  }
  if (block.contains("base_seed")) {
    if (!block.at("base_seed").is_number_integer() ||
        block.at("base_seed").is_number_float()) {
      return ValidationError("base_seed", "must be a non-negative integer");
    }
    if (block.at("base_seed").is_number_unsigned()) {
      run.base_seed = block.at("base_seed").get<uint64_t>();
    } else {
      const int64_t v = block.at("base_seed").get<int64_t>();
      if (v < 0) return ValidationError("base_seed", "must be >= 0");
      run.base_seed = static_cast<uint64_t>(v);
    }
  }
  KP_ASSIGN_OR_RETURN(run.trajectory,
                      ReadBool(block, "trajectory", "trajectory", false));
  KP_ASSIGN_OR_RETURN(run.timing, ReadBool(block, "timing", "timing", false));
  if (block.contains("threads")) {
    if (!block.at("threads").is_number_integer() ||
        block.at("threads").get<int64_t>() < 0) {
      return ValidationError("threads", "must be an integer >= 0");
    }
    run.threads = block.at("threads").get<int>();
  }
  std::string mode;
  KP_ASSIGN_OR_RETURN(mode, ReadString(block, "alg1_mode", "alg1_mode",
                                       "literal"));
  if (mode == "literal") {
    config.params.alg1_mode = Alg1Mode::kLiteral;
  } else if (mode == "strict-box") {
    config.params.alg1_mode = Alg1Mode::kStrictBox;
  } else {
    return ValidationError("alg1_mode", "must be \"literal\" or \"strict-box\"");
  }
  std::string regret;
  KP_ASSIGN_OR_RETURN(regret, ReadString(block, "regret", "regret", "realized"));
  if (regret == "realized") {
    run.regret = RegretEstimator::kRealized;
  } else if (regret == "noise-adjusted") {
    run.regret = RegretEstimator::kNoiseAdjusted;
  } else {
    return ValidationError("regret", "must be \"realized\" or \"noise-adjusted\"");
  }
  return absl::OkStatus();
}

absl::Status ParseOutput(const json& block, OutputSpec& output) {
  if (!block.is_object()) return ValidationError("output", "expected an object");
  KP_RETURN_IF_ERROR(CheckKeys(
      block, "output.", {"dir", "per_rep", "summary", "plot", "trajectory"}));
  KP_ASSIGN_OR_RETURN(output.dir, ReadString(block, "dir", "dir", "out"));
  KP_ASSIGN_OR_RETURN(output.per_rep,
                      ReadString(block, "per_rep", "per_rep", "per_rep.csv"));
  KP_ASSIGN_OR_RETURN(output.summary,
                      ReadString(block, "summary", "summary", "summary.csv"));
  KP_ASSIGN_OR_RETURN(output.plot, ReadString(block, "plot", "plot", "plot.csv"));
  KP_ASSIGN_OR_RETURN(output.trajectory,
                      ReadString(block, "trajectory", "trajectory",
                                 "trajectory.csv"));
  if (output.per_rep.empty() || output.summary.empty()) {
    return ValidationError("output", "per_rep and summary names are required");
  }
  return absl::OkStatus();
}

std::string GateField(const std::optional<GateOutcome>& gate) {
  return gate.has_value() ? std::string(GateName(*gate)) : std::string();
}

std::string Eps0Field(const std::optional<double>& eps0) {
  return eps0.has_value() ? FormatDouble(*eps0) : std::string();
}

std::string JoinVector(const Vector& v) {
  std::vector<std::string> parts;
  parts.reserve(v.size());
  for (int i = 0; i < v.size(); ++i) parts.push_back(FormatDouble(v(i)));
  return absl::StrJoin(parts, " ");
}

absl::Status WriteFile(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::UnavailableError(
        Cat("cannot open ", path.string(), " for writing"));
  }
  out << content;
  out.close();
  if (!out) {
    return absl::UnavailableError(Cat("write failed: ", path.string()));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<ExperimentConfig> ParseConfig(std::string_view text) {
  json root = json::parse(text.begin(), text.end(), nullptr,
                          /*allow_exceptions=*/false, /*ignore_comments=*/true);
  if (root.is_discarded()) return ParseError("document is not valid JSON");
  if (!root.is_object()) return ParseError("top level must be an object");
  KP_RETURN_IF_ERROR(
      CheckKeys(root, "", {"instance", "policy", "run", "output"}));
  if (!root.contains("instance")) return ValidationError("instance", "missing");

  ExperimentConfig config;
  KP_RETURN_IF_ERROR(ParseInstance(root.at("instance"), config.instance));
  if (root.contains("policy")) {
    KP_RETURN_IF_ERROR(ParsePolicy(root.at("policy"), config));
  }
  if (root.contains("run")) KP_RETURN_IF_ERROR(ParseRun(root.at("run"), config));
  if (root.contains("output")) {
    KP_RETURN_IF_ERROR(ParseOutput(root.at("output"), config.output));
  }

  const bool informed =
      std::find(config.policies.begin(), config.policies.end(),
                PolicyKind::kAlg3) != config.policies.end();
  if (informed && !config.prior.has_value()) {
    return ValidationError("prior", "required when policy includes alg3");
  }
  // Materialize every horizon once so bad budgets and priors surface here.
  for (int64_t horizon : config.run.horizons) {
    absl::StatusOr<Instance> instance = BuildInstance(config, horizon);
    if (!instance.ok()) {
      return ValidationError("instance", Sv(instance.status().message()));
    }
    if (informed) {
      if (absl::Status s = CheckInformedPrior(*instance); !s.ok()) {
        return ValidationError("prior", Sv(s.message()));
      }
    }
  }
  return config;
}

std::string SerializeConfig(const ExperimentConfig& config) {
  const InstanceSpec& in = config.instance;
  json instance = {
      {"n", in.alpha.size()},
      {"m", in.A.rows()},
      {"A", ToJsonRowMajor(in.A)},
      {"alpha", ToJson(in.alpha)},
      {"B", ToJsonRowMajor(in.B)},
      {"sigma", in.sigma},
      {"noise", in.noise == NoiseFamily::kGaussian ? "gaussian" : "uniform"},
      {"L", in.lower},
      {"U", in.upper},
  };
  switch (in.budget.kind) {
    case BudgetKind::kDegenerate:
      instance["budget"] = "degenerate";
      break;
    case BudgetKind::kCapacity:
      instance["budget"] = {{"capacity", ToJson(in.budget.values)}};
      break;
    case BudgetKind::kRate:
      instance["budget"] = {{"rate", ToJson(in.budget.values)}};
      break;
  }

  json names = json::array();
  for (PolicyKind kind : config.policies) names.push_back(PolicyName(kind));
  json policy = {{"name", names},
                 {"zeta", config.params.zeta},
                 {"sigma0", config.params.sigma0},
                 {"rho", config.params.rho}};
  if (config.prior.has_value()) {
    const PriorSpec& prior = *config.prior;
    json p;
    if (prior.p0.has_value()) {
      p["p0"] = ToJson(*prior.p0);
    } else {
      p["p0"] = "discount";
    }
    p["discount"] = prior.discount;
    if (prior.d0.has_value()) p["d0"] = ToJson(*prior.d0);
    if (prior.eps0_inverse_sqrt_horizon) {
      p["eps0"] = kEps0InverseSqrtToken;
    } else {
      p["eps0"] = prior.eps0;
    }
    policy["prior"] = p;
  }

  const RunSpec& r = config.run;
  json run = {{"T", r.horizons},
              {"reps", r.reps},
              {"base_seed", r.base_seed},
              {"trajectory", r.trajectory},
              {"timing", r.timing},
              {"threads", r.threads},
              {"alg1_mode", config.params.alg1_mode == Alg1Mode::kLiteral
                                ? "literal"
                                : "strict-box"},
              {"regret", r.regret == RegretEstimator::kRealized
                             ? "realized"
                             : "noise-adjusted"}};
  const OutputSpec& o = config.output;
  json output = {{"dir", o.dir},
                 {"per_rep", o.per_rep},
                 {"summary", o.summary},
                 {"plot", o.plot},
                 {"trajectory", o.trajectory}};
  json root = {{"instance", instance},
               {"policy", policy},
               {"run", run},
               {"output", output}};
  return root.dump(2) + "\n";
}

absl::Status ApplyEnvironmentOverrides(
    ExperimentConfig& config,
    const std::function<const char*(const char*)>& getenv) {
  auto lookup = [&](const char* name) -> const char* {
    return getenv ? getenv(name) : std::getenv(name);
  };
  if (const char* seed = lookup("SEED"); seed != nullptr && *seed != '\0') {
    uint64_t value = 0;
    if (!absl::SimpleAtoi(seed, &value)) {
      return ValidationError("SEED", "must be a non-negative integer");
    }
    config.run.base_seed = value;
  }
  if (const char* threads = lookup("THREADS");
      threads != nullptr && *threads != '\0') {
    int value = 0;
    if (!absl::SimpleAtoi(threads, &value) || value < 0) {
      return ValidationError("THREADS", "must be a non-negative integer");
    }
    config.run.threads = value;
  }
  return absl::OkStatus();
}

absl::StatusOr<Instance> BuildInstance(const ExperimentConfig& config,
                                       int64_t horizon,
                                       std::optional<double> eps0_override) {
  const InstanceSpec& spec = config.instance;
  Instance instance;
  instance.model = DemandModel{spec.alpha, spec.B, spec.sigma, spec.noise};
  instance.A = spec.A;
  instance.horizon = horizon;
  instance.lower = spec.lower;
  instance.upper = spec.upper;

  absl::StatusOr<UnconstrainedOptimum> opt =
      ComputeUnconstrainedOptimum(instance.model);
  if (!opt.ok()) return opt.status();
  const double T = static_cast<double>(horizon);
  switch (spec.budget.kind) {
    case BudgetKind::kDegenerate:
      instance.capacity = T * (spec.A * opt->demand);
      if ((instance.capacity.array() < 0.0).any()) {
        return absl::InvalidArgumentError(
            "degenerate budget T * A d* is negative");
      }
      break;
    case BudgetKind::kCapacity:
      instance.capacity = spec.budget.values;
      break;
    case BudgetKind::kRate:
      instance.capacity = T * spec.budget.values;
      break;
  }

  if (config.prior.has_value()) {
    const PriorSpec& ps = *config.prior;
    InformedPrior prior;
    prior.p0 = ps.p0.has_value() ? *ps.p0 : Vector(ps.discount * opt->price);
    if (eps0_override.has_value()) {
      prior.eps0 = *eps0_override;
    } else if (ps.eps0_inverse_sqrt_horizon) {
      prior.eps0 = 1.0 / std::sqrt(T);
    } else {
      prior.eps0 = ps.eps0;
    }
    if (ps.d0.has_value()) {
      prior.d0 = *ps.d0;
    } else {
      const int n = instance.num_products();
      const Vector u = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
      prior.d0 = MeanDemand(instance.model, prior.p0) + prior.eps0 * u;
    }
    instance.prior = std::move(prior);
  }
  if (absl::Status s = ValidateInstance(instance); !s.ok()) return s;
  return instance;
}

absl::StatusOr<BatchResult> RunBatch(const ExperimentConfig& config) {
  BatchResult result;
  result.timed = config.run.timing;
  ReplicateOptions options;
  options.threads = config.run.threads;
  options.estimator = config.run.regret;
  options.episode.record_trajectory = config.run.trajectory;
  options.episode.measure_time = config.run.timing;
  for (PolicyKind kind : config.policies) {
    for (int64_t horizon : config.run.horizons) {
      absl::StatusOr<Instance> instance = BuildInstance(config, horizon);
      if (!instance.ok()) return instance.status();
      absl::StatusOr<ReplicationStats> stats =
          Replicate(*instance, PolicySpec{kind, config.params}, config.run.reps,
                    config.run.base_seed, options);
      if (!stats.ok()) {
        return absl::Status(stats.status().code(),
                            Cat(PolicyName(kind), " T=", horizon, ": ",
                                         stats.status().message()));
      }
      BatchRow row;
      row.policy = kind;
      row.horizon = horizon;
      if (kind == PolicyKind::kAlg3) {
        row.eps0 = instance->prior->eps0;
        row.gate = stats->gate;
      }
      for (const std::string& f : stats->failures) {
        result.failures.push_back(
            Cat(PolicyName(kind), " T=", horizon, " ", f));
      }
      row.stats = *std::move(stats);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

absl::StatusOr<BatchResult> SweepEpsilon(const ExperimentConfig& config,
                                         const std::vector<double>& eps0s) {
  if (!config.prior.has_value()) {
    return ValidationError("prior", "epsilon sweeps need a prior block");
  }
  if (eps0s.empty()) return ValidationError("eps0", "empty sweep");
  for (double e : eps0s) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      return ValidationError("eps0", "values must be finite and >= 0");
    }
  }
  BatchResult result;
  result.timed = config.run.timing;
  ReplicateOptions options;
  options.threads = config.run.threads;
  options.estimator = config.run.regret;
  options.episode.record_trajectory = config.run.trajectory;
  options.episode.measure_time = config.run.timing;

  auto run_row = [&](PolicyKind kind, int64_t horizon,
                     std::optional<double> eps0) -> absl::Status {
    absl::StatusOr<Instance> instance = BuildInstance(config, horizon, eps0);
    if (!instance.ok()) return instance.status();
    absl::StatusOr<ReplicationStats> stats =
        Replicate(*instance, PolicySpec{kind, config.params}, config.run.reps,
                  config.run.base_seed, options);
    if (!stats.ok()) return stats.status();
    BatchRow row;
    row.policy = kind;
    row.horizon = horizon;
    if (kind == PolicyKind::kAlg3) {
      row.eps0 = instance->prior->eps0;
      row.gate = stats->gate;
    }
    for (const std::string& f : stats->failures) {
      result.failures.push_back(
          Cat(PolicyName(kind), " T=", horizon, " ", f));
    }
    row.stats = *std::move(stats);
    result.rows.push_back(std::move(row));
    return absl::OkStatus();
  };

  for (int64_t horizon : config.run.horizons) {
    KP_RETURN_IF_ERROR(run_row(PolicyKind::kAlg2, horizon, std::nullopt));
    for (double e : eps0s) {
      KP_RETURN_IF_ERROR(run_row(PolicyKind::kAlg3, horizon, e));
    }
  }
  return result;
}

double GateBoundary(double rho, int64_t horizon) {
  return std::sqrt(rho) * std::pow(static_cast<double>(horizon), -0.25);
}

std::vector<double> AutoEpsilonGrid(double rho, int64_t horizon) {
  const double b = GateBoundary(rho, horizon);
  std::vector<double> grid;
  for (double f : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.05, 1.25, 1.5, 2.0, 3.0}) {
    grid.push_back(f * b);
  }
  return grid;
}

std::string FormatDouble(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string FormatPerRepCsv(const BatchResult& result) {
  std::string out = Cat(kPerRepHeader, "\n");
  for (const BatchRow& row : result.rows) {
    for (const EpisodeResult& ep : row.stats.episodes) {
      Append(out, PolicyName(row.policy), ",", row.horizon, ",",
                      ep.rep, ",", ep.seed, ",", FormatDouble(ep.revenue), ",",
                      FormatDouble(ep.upper_bound), ",",
                      FormatDouble(ep.regret), ",", ep.stockouts, ",",
                      result.timed ? FormatDouble(ep.runtime_ms) : "", "\n");
    }
  }
  return out;
}

std::string FormatSummaryCsv(const BatchResult& result) {
  std::string out = Cat(kSummaryHeader, "\n");
  for (const BatchRow& row : result.rows) {
    const ReplicationStats& s = row.stats;
    Append(out, PolicyName(row.policy), ",", row.horizon, ",",
                    Eps0Field(row.eps0), ",", GateField(row.gate), ",", s.reps,
                    ",", FormatDouble(s.mean_regret), ",",
                    FormatDouble(s.std_regret), ",",
                    FormatDouble(s.mean_regret - s.ci95_half_width), ",",
                    FormatDouble(s.mean_regret + s.ci95_half_width), "\n");
  }
  return out;
}

std::string FormatPlotCsv(const BatchResult& result, PlotAxis axis) {
  std::string out = Cat(kPlotHeader, "\n");
  for (const BatchRow& row : result.rows) {
    const ReplicationStats& s = row.stats;
    std::string series;
    std::string x;
    if (axis == PlotAxis::kHorizon) {
      series = std::string(PolicyName(row.policy));
      x = Cat(row.horizon);
    } else {
      if (!row.eps0.has_value()) continue;
      series = Cat(PolicyName(row.policy), "_T", row.horizon);
      x = FormatDouble(*row.eps0);
    }
    Append(out, series, ",", x, ",", FormatDouble(s.mean_regret),
                    ",", FormatDouble(s.mean_regret - s.ci95_half_width), ",",
                    FormatDouble(s.mean_regret + s.ci95_half_width), "\n");
  }
  return out;
}

std::string FormatTrajectoryCsv(const BatchResult& result) {
  std::string out =
      "policy,T,eps0,rep,t,price,realized,accepted,capacity_after,rejected,"
      "stockout\n";
  for (const BatchRow& row : result.rows) {
    for (const EpisodeResult& ep : row.stats.episodes) {
      for (const StepRecord& rec : ep.trajectory) {
        Append(out, PolicyName(row.policy), ",", row.horizon, ",",
                        Eps0Field(row.eps0), ",", ep.rep, ",", rec.t, ",",
                        JoinVector(rec.price), ",", JoinVector(rec.realized),
                        ",", JoinVector(rec.accepted), ",",
                        JoinVector(rec.capacity_after), ",",
                        absl::StrJoin(rec.rejected, " "), ",",
                        rec.stockout ? 1 : 0, "\n");
      }
    }
  }
  return out;
}

absl::Status WriteOutputs(const BatchResult& result, const OutputSpec& output,
                          bool trajectory, PlotAxis axis) {
  std::error_code ec;
  const std::filesystem::path dir(output.dir);
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    return absl::UnavailableError(
        Cat("cannot create ", output.dir, ": ", ec.message()));
  }
  KP_RETURN_IF_ERROR(WriteFile(dir / output.per_rep, FormatPerRepCsv(result)));
  KP_RETURN_IF_ERROR(WriteFile(dir / output.summary, FormatSummaryCsv(result)));
  if (!output.plot.empty()) {
    KP_RETURN_IF_ERROR(
        WriteFile(dir / output.plot, FormatPlotCsv(result, axis)));
  }
  if (trajectory && !output.trajectory.empty()) {
    KP_RETURN_IF_ERROR(
        WriteFile(dir / output.trajectory, FormatTrajectoryCsv(result)));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<SummaryRecord>> ParseSummaryCsv(
    std::string_view text) {
  std::vector<absl::string_view> lines =
      absl::StrSplit(Av(text), '\n', absl::SkipEmpty());
  if (lines.empty() || Sv(lines.front()) != kSummaryHeader) {
    return ParseError("summary CSV header mismatch");
  }
  std::vector<SummaryRecord> records;
  for (size_t i = 1; i < lines.size(); ++i) {
    std::vector<absl::string_view> f = absl::StrSplit(lines[i], ',');
    if (f.size() != 9) {
      return ParseError(Cat("line ", i + 1, ": expected 9 fields"));
    }
    SummaryRecord rec;
    rec.policy = std::string(f[0]);
    rec.eps0 = std::string(f[2]);
    rec.gate = std::string(f[3]);
    if (!absl::SimpleAtoi(f[1], &rec.horizon) ||
        !absl::SimpleAtoi(f[4], &rec.reps) ||
        !absl::SimpleAtod(f[5], &rec.mean_regret) ||
        !absl::SimpleAtod(f[6], &rec.std_regret) ||
        !absl::SimpleAtod(f[7], &rec.ci95_lo) ||
        !absl::SimpleAtod(f[8], &rec.ci95_hi)) {
      return ParseError(Cat("line ", i + 1, ": bad number"));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

absl::StatusOr<SlopeFit> FitLogLogSlope(const std::vector<double>& horizons,
                                        const std::vector<double>& regrets) {
  if (horizons.size() != regrets.size()) {
    return absl::InvalidArgumentError("horizons and regrets differ in length");
  }
  const int k = static_cast<int>(horizons.size());
  if (k < 3) {
    return absl::FailedPreconditionError(Cat(
        "InsufficientData: need at least 3 horizons, got ", k));
  }
  std::vector<double> x(k);
  std::vector<double> y(k);
  for (int i = 0; i < k; ++i) {
    if (!(horizons[i] > 0.0) || !(regrets[i] > 0.0)) {
      return absl::InvalidArgumentError(Cat(
          "NonPositiveRegret: log-log fit needs T > 0 and regret > 0, got T=",
          horizons[i], " regret=", regrets[i]));
    }
    x[i] = std::log(horizons[i]);
    y[i] = std::log(regrets[i]);
  }
  double mx = 0.0;
  double my = 0.0;
  for (int i = 0; i < k; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (int i = 0; i < k; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) {
    return absl::FailedPreconditionError(
        "InsufficientData: horizons must not all be equal");
  }
  SlopeFit fit;
  fit.points = k;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (int i = 0; i < k; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.stderr_slope = std::sqrt(sse / (k - 2) / sxx);
  return fit;
}

absl::StatusOr<std::vector<SeriesSlope>> FitSummarySlopes(
    const std::vector<SummaryRecord>& records, double min_T, double max_T,
    std::optional<std::string> eps0) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      series;
  for (const SummaryRecord& rec : records) {
    const double T = static_cast<double>(rec.horizon);
    if (T < min_T || T > max_T) continue;
    // Rows without an eps0 (alg1, alg2, clairvoyant) pass the filter.
    if (eps0.has_value() && !rec.eps0.empty() && rec.eps0 != *eps0) continue;
    auto [it, inserted] = series.try_emplace(rec.policy);
    if (inserted) order.push_back(rec.policy);
    auto& [xs, ys] = it->second;
    if (std::find(xs.begin(), xs.end(), T) != xs.end()) {
      return absl::InvalidArgumentError(Cat(
          "series ", rec.policy, " repeats T=", rec.horizon,
          "; select one eps0 with --eps0"));
    }
    xs.push_back(T);
    ys.push_back(rec.mean_regret);
  }
  std::vector<SeriesSlope> out;
  for (const std::string& policy : order) {
    const auto& [xs, ys] = series[policy];
    if (xs.size() < 3) continue;
    out.push_back(SeriesSlope{policy, FitLogLogSlope(xs, ys)});
  }
  if (out.empty()) {
    return absl::FailedPreconditionError(Cat(
        "InsufficientData: no series has 3 horizons in [", min_T, ", ", max_T,
        "]"));
  }
  return out;
}

}  // namespace kpricing
