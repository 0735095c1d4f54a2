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

#include <atomic>
#include <cstdint>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/core/types.hpp"

namespace predserve::bench {

// Queries at indices [begin, end) see error rate `rate`.
struct ErrorWindow {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  double rate = 0;
};

struct SyntheticModelSpec {
  Duration latency_fixed{0};
  Duration latency_per_item{0};
  // Standard deviation of a Gaussian term added to each batch latency.
  Duration jitter{0};
  double error_rate = 0;
  // Overrides error_rate inside each window; the first matching window wins.
  std::vector<ErrorWindow> error_schedule;
  std::vector<std::string> labels{"0", "1"};
  // Distinguishes the error draws of otherwise identical models.
  std::uint64_t seed = 0;

  // Throws InvalidArgument.
  void validate() const;
};

double error_rate_at(const SyntheticModelSpec& spec, std::uint64_t query_index);

// Deterministic in (spec.seed, query_index).
bool synthetic_errs(const SyntheticModelSpec& spec, std::uint64_t query_index);

// The true label when the model is right, otherwise the next label in
// spec.labels.
std::string synthetic_output(const SyntheticModelSpec& spec, std::uint64_t query_index,
                             std::uint32_t truth);

// fixed + per_item * n + N(0, jitter), clamped at zero.
Duration synthetic_latency(const SyntheticModelSpec& spec, std::size_t n, std::mt19937_64& rng);

// Bench inputs are two ints: the query index (low 31 bits) and the index of
// the true label.
InputPayload labelled_input(std::uint64_t query_index, std::uint32_t truth);
struct LabelledInput {
  std::uint64_t query_index = 0;
  std::uint32_t truth = 0;
};
LabelledInput decode_labelled_input(const InputPayload& input);

// Answers batches of labelled inputs after sleeping the synthetic latency.
class SyntheticModel {
 public:
  explicit SyntheticModel(SyntheticModelSpec spec, std::uint64_t jitter_seed = 0);

  std::vector<std::vector<std::string>> predict(const std::vector<InputPayload>& inputs);

  // Batch size each query index was last evaluated in, 0 if never. Indices
  // beyond the tracked range are not recorded.
  void track_batch_sizes(std::size_t max_index);
  std::uint32_t batch_size_of(std::uint64_t query_index) const;

  const SyntheticModelSpec& spec() const noexcept { return spec_; }
  std::uint64_t items() const noexcept { return items_.load(); }
  std::uint64_t batches() const noexcept { return batches_.load(); }
  // Total time spent evaluating batches.
  Duration busy() const noexcept { return Duration(busy_ns_.load()); }
  // Makes every subsequent batch take this long instead; a negative value
  // restores the synthetic latency.
  void set_latency_override(Duration latency);

 private:
  const SyntheticModelSpec spec_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::atomic<std::int64_t> override_ns_{-1};
  std::vector<std::atomic<std::uint32_t>> batch_sizes_;
  std::atomic<std::uint64_t> items_{0};
  std::atomic<std::uint64_t> batches_{0};
  std::atomic<std::int64_t> busy_ns_{0};
};

}  // namespace predserve::bench
