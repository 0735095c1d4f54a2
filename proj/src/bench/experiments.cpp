// Copyright 2026 The predserve Authors.
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

#include "predserve/bench/experiments.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"
#include "predserve/frontend/config.hpp"

namespace predserve::bench {

const std::vector<ExperimentInfo>& experiments() {
  static const std::vector<ExperimentInfo> kAll{
      {"aimd-convergence",
       "AIMD max batch size on a linear latency profile (discrete-event simulation)",
       {{"rate", 9200},
        {"duration_s", 60},
        {"fixed_ms", 1},
        {"per_item_ms", 0.1},
        {"slo_ms", 20},
        {"additive_step", 4},
        {"steady_min", 171},
        {"steady_max", 194},
        {"min_within_slo", 0.99}},
       run_aimd_convergence},
      {"batching-comparison",
       "throughput of no batching, AIMD and quantile batching on a high fixed-cost model",
       {{"fixed_ms", 5},
        {"per_item_ms", 0.05},
        {"slo_ms", 50},
        {"concurrency", 400},
        {"baseline_warmup_s", 1},
        {"warmup_s", 8},
        {"measure_s", 5},
        {"max_qps", 30000},
        {"min_speedup", 5},
        {"max_gap", 0.15}},
       run_batching_comparison},
      {"batch-delay",
       "delayed batching at moderate Poisson load",
       {{"fixed_ms", 5},
        {"per_item_ms", 0.05},
        {"slo_ms", 50},
        {"rate", 500},
        {"duration_s", 8},
        {"delay_ms", 2},
        {"min_ratio", 1.5}},
       run_batch_delay},
      {"model-failure",
       "Exp3 and Exp4 cumulative error while the best of five models degrades",
       {{"queries", 20000},
        {"degrade_begin", 5000},
        {"degrade_end", 10000},
        {"degraded_rate", 0.9},
        {"eta", 0.1},
        {"weight_floor", 1e-6},
        {"pre_window_tolerance", 0.03},
        {"curve_stride", 100}},
       run_model_failure},
      {"ensemble-confidence",
       "Exp4 ensemble error and error of unanimous answers",
       {{"queries", 10000},
        {"models", 5},
        {"error_rate", 0.3},
        {"eta", 0.01},
        {"weight_floor", 1e-6},
        {"min_margin", 0.05}},
       run_ensemble_confidence},
      {"stragglers",
       "ensembles with one slow member: deadline combining vs blocking",
       {{"slo_ms", 20},
        {"combine_margin_ms", 1},
        {"slow_factor", 10},
        {"fast_ms", 1},
        {"error_rate", 0.3},
        {"rate", 100},
        {"warmup_s", 1},
        {"duration_s", 3},
        {"pause_threshold_ms", 10},
        {"max_attempts", 5},
        {"blocking_duration_s", 1},
        {"blocking_timeout_ms", 1000},
        {"max_size", 16},
        {"min_missing_fraction", 0.95},
        {"max_accuracy_drop", 0.05}},
       run_stragglers},
      {"cache-zipf",
       "prediction cache hit rate, occupancy and miss coalescing",
       {{"capacity", 100},
        {"universe", 1000},
        {"zipf_s", 1.1},
        {"queries", 100000},
        {"threads", 16},
        {"hit_rate_tolerance", 0.02}},
       run_cache_zipf},
      {"feedback-cache",
       "feedback throughput with cached vs uncached predictions",
       {{"models", 3},
        {"items", 2000},
        {"slo_ms", 50},
        {"fixed_ms", 2},
        {"per_item_ms", 0.02},
        {"concurrency", 64}},
       run_feedback_cache},
      {"fault-injection",
       "deadline property while containers are killed, disconnected and stalled",
       {{"models", 3},
        {"slo_ms", 50},
        {"combine_margin_ms", 5},
        {"replica_timeout_ms", 200},
        {"fixed_ms", 1},
        {"rate", 200},
        {"duration_s", 6},
        {"fault_interval_ms", 150},
        {"down_ms", 100},
        {"stall_ms", 400},
        {"pause_threshold_ms", 5},
        {"max_attempts", 8}},
       run_fault_injection},
  };
  return kAll;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const auto& e : experiments()) {
    if (e.name == name) return e;
  }
  throw NotFound(fmt::format("unknown experiment '{}'", name));
}

ExperimentReport run_experiment(const std::string& name, std::uint64_t seed, const Params& params) {
  const auto& info = find_experiment(name);
  Params merged = info.defaults;
  for (const auto& [key, value] : params) {
    if (merged.count(key) == 0) {
      throw InvalidArgument(fmt::format("experiment '{}' has no parameter '{}'", name, key));
    }
    merged[key] = value;
  }
  auto report = info.run(seed, merged);
  report.experiment = name;
  report.seed = seed;
  return report;
}

Params load_params(const std::filesystem::path& path, const std::string& experiment) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  Params out;
  for (const auto& section : frontend::parse_config_document(buf.str(), path.string())) {
    if (section.name != experiment) continue;
    for (const auto& [key, value] : section.entries) {
      const auto* number = std::get_if<double>(&value.value);
      if (number == nullptr) {
        throw ConfigError(
            fmt::format("{}:{}: parameter '{}' must be a number", path.string(), value.line, key));
      }
      out[key] = *number;
    }
  }
  return out;
}

}  // namespace predserve::bench
