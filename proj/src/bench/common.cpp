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

#include "common.hpp"

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::bench::detail {

double param(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw InvalidArgument(fmt::format("missing parameter '{}'", key));
  return it->second;
}

Duration param_ms(const Params& p, const std::string& key) { return from_millis(param(p, key)); }

std::uint32_t binary_truth(std::uint64_t seed, std::uint64_t item) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + item + 1;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<std::uint32_t>((x ^ (x >> 31)) & 1);
}

bool correct(const QueryRecord& r, const TruthFn& truth) {
  return !r.prediction.is_default && r.prediction.output.value == std::to_string(truth(r.item));
}

Table query_table(const std::string& name, const std::vector<QueryRecord>& records,
                  const TruthFn& truth,
                  const std::function<std::uint32_t(std::uint64_t)>& batch_size) {
  Table t{name, {"ts_ms", "latency_ms", "batch_size", "models_missing", "is_default", "correct"}, {}};
  t.rows.reserve(records.size());
  for (const auto& r : records) {
    if (!r.completed) continue;
    t.add({fmt_double(to_millis(r.issued)), fmt_double(to_millis(r.latency)),
           batch_size ? std::to_string(batch_size(r.item)) : "",
           std::to_string(r.prediction.models_missing), r.prediction.is_default ? "1" : "0",
           correct(r, truth) ? "1" : "0"});
  }
  return t;
}

void summarize_latency(ExperimentReport& report, const std::string& prefix,
                       const std::vector<QueryRecord>& records, Duration slo) {
  std::vector<double> ms;
  std::uint64_t violations = 0;
  for (const auto& r : records) {
    if (!r.completed) continue;
    ms.push_back(to_millis(r.latency));
    if (r.latency > slo) violations += 1;
  }
  report.summary[prefix + "queries"] = static_cast<double>(ms.size());
  report.summary[prefix + "p50_ms"] = percentile(ms, 50);
  report.summary[prefix + "p95_ms"] = percentile(ms, 95);
  report.summary[prefix + "p99_ms"] = percentile(ms, 99);
  report.summary[prefix + "max_ms"] = percentile(ms, 100);
  report.summary[prefix + "slo_violations"] = static_cast<double>(violations);
}

}  // namespace predserve::bench::detail
