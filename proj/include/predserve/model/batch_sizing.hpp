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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "predserve/core/clock.hpp"

namespace predserve::model {

struct LatencySample {
  std::uint32_t batch_size = 1;
  Duration latency{};
};

// Sliding window of the most recent batch latency measurements.
class LatencyProfile {
 public:
  static constexpr std::size_t kDefaultWindow = 1000;

  explicit LatencyProfile(std::size_t window = kDefaultWindow);

  // Ignores samples with batch_size 0 or non-positive latency.
  void record(LatencySample sample);

  std::size_t size() const noexcept { return count_; }
  std::size_t window() const noexcept { return ring_.size(); }
  std::size_t distinct_batch_sizes() const;
  // Oldest first.
  std::vector<LatencySample> samples() const;
  std::optional<LatencySample> last() const;

 private:
  std::vector<LatencySample> ring_;
  std::size_t next_ = 0;
  std::size_t count_ = 0;
};

enum class BatchStrategy { kAimd, kQuantile, kFixed };

std::string_view batch_strategy_name(BatchStrategy s);
std::optional<BatchStrategy> parse_batch_strategy(std::string_view name);

inline constexpr std::uint32_t kMaxBatchCap = 1u << 16;
inline constexpr std::uint32_t kDefaultAdditiveStep = 4;

// Multiplicative decrease by 10% on an SLO miss, additive increase after a
// full batch that met the SLO.
std::uint32_t aimd_update(LatencySample observed, Duration slo, std::uint32_t current_max,
                          std::uint32_t additive_step = kDefaultAdditiveStep);

// latency_ms ~= intercept_ms + slope_ms * batch_size
struct LinearFit {
  double intercept_ms = 0;
  double slope_ms = 0;
};

inline constexpr std::size_t kQuantileMinSamples = 50;
inline constexpr std::size_t kQuantileMinDistinctSizes = 3;
inline constexpr int kQuantileIterations = 500;

// Linear quantile regression by subgradient descent on the pinball loss.
// nullopt unless the profile holds enough samples across enough sizes.
std::optional<LinearFit> fit_latency_quantile(const LatencyProfile& profile, double tau = 0.99);

// Largest B in [1, 2^16] with intercept + slope * B <= slo.
std::uint32_t max_batch_within(const LinearFit& fit, Duration slo);

std::optional<std::uint32_t> quantile_max_batch(const LatencyProfile& profile, Duration slo,
                                                double tau = 0.99);

struct BatchingOptions {
  BatchStrategy strategy = BatchStrategy::kAimd;
  std::uint32_t additive_step = kDefaultAdditiveStep;
  std::uint32_t initial_max = 1;
  // Cap for kFixed; upper clamp for the adaptive strategies.
  std::uint32_t max_batch_size = kMaxBatchCap;
  double tau = 0.99;
  std::size_t profile_window = LatencyProfile::kDefaultWindow;
  // The quantile fit is recomputed every refit_interval observations.
  std::uint32_t refit_interval = 8;
};

// Owns one replica's profile and current maximum batch size. Not
// thread-safe; owned by a single dispatch worker.
class BatchSizer {
 public:
  explicit BatchSizer(BatchingOptions options);

  std::uint32_t max_batch() const noexcept { return current_; }
  const LatencyProfile& profile() const noexcept { return profile_; }
  const BatchingOptions& options() const noexcept { return options_; }

  // Records the sample and recomputes the maximum batch size.
  std::uint32_t observe(LatencySample sample, Duration slo);

 private:
  BatchingOptions options_;
  LatencyProfile profile_;
  std::uint32_t aimd_max_;
  std::uint32_t current_;
  std::optional<std::uint32_t> quantile_max_;
  std::uint32_t since_fit_ = 0;
};

}  // namespace predserve::model
