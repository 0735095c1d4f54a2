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

#include "predserve/bench/simulator.hpp"

#include <algorithm>
#include <deque>

#include "predserve/core/errors.hpp"

namespace predserve::bench {

double SimResult::throughput() const {
  const double secs = to_millis(end) / 1000.0;
  return secs > 0 ? static_cast<double>(served) / secs : 0.0;
}

SimResult simulate_replica(const std::vector<Duration>& arrivals, const SimOptions& options) {
  if (!options.latency) throw InvalidArgument("simulation needs a latency function");
  model::BatchSizer sizer(options.batching);
  SimResult result;
  result.query_latency.assign(arrivals.size(), std::nullopt);
  result.query_batch_size.assign(arrivals.size(), 0);

  std::deque<std::size_t> queue;
  std::size_t next = 0;
  Duration t{0};
  auto admit_until = [&](Duration until) {
    while (next < arrivals.size() && arrivals[next] <= until) queue.push_back(next++);
  };
  auto deadline = [&](std::size_t i) { return arrivals[i] + options.query_slo; };

  while (next < arrivals.size() || !queue.empty()) {
    if (queue.empty()) t = std::max(t, arrivals[next]);
    admit_until(t);
    const std::uint32_t limit = sizer.max_batch();

    if (options.batch_delay > Duration::zero() && queue.size() < limit) {
      const auto expected = sizer.profile().last().value_or(model::LatencySample{}).latency;
      const Duration until = std::min(t + options.batch_delay, deadline(queue.front()) - expected);
      while (queue.size() < limit && next < arrivals.size() && arrivals[next] <= until) {
        t = std::max(t, arrivals[next]);
        queue.push_back(next++);
      }
      if (queue.size() < limit) t = std::max(t, until);
    }

    std::vector<std::size_t> batch;
    while (!queue.empty() && batch.size() < limit) {
      const auto i = queue.front();
      queue.pop_front();
      if (deadline(i) <= t) {
        result.expired += 1;
      } else {
        batch.push_back(i);
      }
    }
    if (batch.empty()) continue;

    const auto n = static_cast<std::uint32_t>(batch.size());
    const Duration latency = options.latency(n);
    SimBatch b{t, n, latency, 0};
    b.max_batch = sizer.observe({n, latency}, options.batch_slo);
    result.batches.push_back(b);
    t += latency;
    for (const auto i : batch) {
      result.query_latency[i] = t - arrivals[i];
      result.query_batch_size[i] = n;
    }
    result.served += n;
  }
  result.end = std::max(t, arrivals.empty() ? Duration{0} : arrivals.back());
  return result;
}

}  // namespace predserve::bench
