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

#include <functional>
#include <string>
#include <vector>

#include "predserve/bench/deployment.hpp"
#include "predserve/bench/experiments.hpp"
#include "predserve/bench/report.hpp"

namespace predserve::bench::detail {

double param(const Params& p, const std::string& key);
Duration param_ms(const Params& p, const std::string& key);

// Truth label index (0 or 1) of a bench item.
std::uint32_t binary_truth(std::uint64_t seed, std::uint64_t item);

// Per-query rows: ts_ms, latency_ms, batch_size, models_missing, is_default,
// correct. batch_size may be empty.
Table query_table(const std::string& name, const std::vector<QueryRecord>& records,
                  const TruthFn& truth, const std::function<std::uint32_t(std::uint64_t)>& batch_size);

bool correct(const QueryRecord& r, const TruthFn& truth);

// Adds <prefix>p50_ms, p95_ms, p99_ms, max_ms, slo_violations and queries.
void summarize_latency(ExperimentReport& report, const std::string& prefix,
                       const std::vector<QueryRecord>& records, Duration slo);

}  // namespace predserve::bench::detail
