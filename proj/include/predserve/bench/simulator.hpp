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
#include <functional>
#include <optional>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/model/batch_sizing.hpp"

namespace predserve::bench {

struct SimOptions {
  model::BatchingOptions batching;
  // Latency target handed to the batch sizer.
  Duration batch_slo{milliseconds(18)};
  // Each query's deadline is its arrival plus this.
  Duration query_slo{milliseconds(20)};
  Duration batch_delay{0};
  // Service time of a batch of n.
  std::function<Duration(std::uint32_t n)> latency;
};

struct SimBatch {
  Duration start{0};
  std::uint32_t size = 0;
  Duration latency{0};
  std::uint32_t max_batch = 0;  // after observing this batch
};

struct SimResult {
  std::vector<SimBatch> batches;
  // Completion minus arrival per query; nullopt when the query expired in
  // the queue and was never sent.
  std::vector<std::optional<Duration>> query_latency;
  // Size of the batch each query was served in, 0 if it expired.
  std::vector<std::uint32_t> query_batch_size;
  std::uint64_t served = 0;
  std::uint64_t expired = 0;
  Duration end{0};  // last arrival or completion

  // Served queries per second of simulated time.
  double throughput() const;
};

// Discrete-event simulation of one replica's dispatch worker: FIFO queue,
// optional delayed batching, expired queries skipped, batch size chosen by a
// real BatchSizer. Arrival offsets must be non-decreasing.
SimResult simulate_replica(const std::vector<Duration>& arrivals, const SimOptions& options);

}  // namespace predserve::bench
