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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "predserve/bench/report.hpp"

namespace predserve::bench {

using Params = std::map<std::string, double>;

struct ExperimentInfo {
  std::string name;
  std::string description;
  Params defaults;
  std::function<ExperimentReport(std::uint64_t seed, const Params& params)> run;
};

const std::vector<ExperimentInfo>& experiments();
const ExperimentInfo& find_experiment(const std::string& name);  // throws NotFound

// Runs with the defaults overridden by params. Unknown parameter names throw
// InvalidArgument.
ExperimentReport run_experiment(const std::string& name, std::uint64_t seed,
                                const Params& params = {});

// Reads overrides for one experiment from the [NAME] section of a config
// file in the service configuration syntax. Other sections are ignored.
Params load_params(const std::filesystem::path& path, const std::string& experiment);

// Per-experiment entry points.
ExperimentReport run_aimd_convergence(std::uint64_t seed, const Params& p);
ExperimentReport run_batching_comparison(std::uint64_t seed, const Params& p);
ExperimentReport run_batch_delay(std::uint64_t seed, const Params& p);
ExperimentReport run_model_failure(std::uint64_t seed, const Params& p);
ExperimentReport run_ensemble_confidence(std::uint64_t seed, const Params& p);
ExperimentReport run_stragglers(std::uint64_t seed, const Params& p);
ExperimentReport run_cache_zipf(std::uint64_t seed, const Params& p);
ExperimentReport run_feedback_cache(std::uint64_t seed, const Params& p);
ExperimentReport run_fault_injection(std::uint64_t seed, const Params& p);

}  // namespace predserve::bench
