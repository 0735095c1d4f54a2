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
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/core/metrics.hpp"
#include "predserve/model/batch_sizing.hpp"
#include "predserve/model/prediction_cache.hpp"

namespace predserve::model {

// Evaluates one batch; one output list per input. Throws on failure:
// ReplicaTimeout, ModelUnavailable (container error) or, for a dead
// replica, ConnectionClosed / ProtocolError.
using BatchFn =
    std::function<std::vector<std::vector<std::string>>(std::span<const InputPayload>)>;

struct BatchTask {
  CacheKey key;
  TimePoint deadline = TimePoint::max();
  TimePoint enqueued{};
};

struct WorkerOptions {
  BatchingOptions batching;
  // Latency target for batch sizing.
  Duration batch_slo{milliseconds(18)};
  Duration batch_delay{0};
};

// The dispatch loop for one (model, replica) pair: a FIFO of pending cache
// keys drained in batches of at most max_batch() on a dedicated thread.
class ReplicaWorker {
 public:
  ReplicaWorker(ModelName model, std::uint64_t replica_id, WorkerOptions options,
                PredictionCache& cache, BatchFn evaluate, MetricsRegistry* metrics = nullptr);
  ~ReplicaWorker();

  ReplicaWorker(const ReplicaWorker&) = delete;
  ReplicaWorker& operator=(const ReplicaWorker&) = delete;

  void start();
  // Stops the thread and fails every queued task.
  void stop();

  // False when the worker has stopped; the task was not queued.
  bool enqueue(BatchTask task);

  const ModelName& model() const noexcept { return model_; }
  std::uint64_t replica_id() const noexcept { return replica_id_; }
  std::size_t queue_length() const;
  std::uint32_t max_batch() const noexcept { return max_batch_.load(); }
  bool stopped() const noexcept { return stopped_.load(); }
  void set_batch_delay(Duration delay);

  std::uint64_t batches() const noexcept { return batches_.load(); }
  std::uint64_t dispatched() const noexcept { return dispatched_.load(); }
  std::uint64_t expired() const noexcept { return expired_.load(); }
  std::uint64_t slo_misses() const noexcept { return slo_misses_.load(); }

 private:
  void run();
  void execute(std::vector<BatchTask>& batch);
  void fail_all(std::vector<BatchTask>& tasks);

  const ModelName model_;
  const std::uint64_t replica_id_;
  const Duration batch_slo_;
  PredictionCache& cache_;
  const BatchFn evaluate_;
  BatchSizer sizer_;  // dispatch thread only

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<BatchTask> queue_;
  Duration batch_delay_;
  bool stopping_ = false;
  std::thread thread_;

  std::atomic<bool> stopped_{false};
  std::atomic<std::uint32_t> max_batch_;
  std::atomic<std::uint64_t> batches_{0};
  std::atomic<std::uint64_t> dispatched_{0};
  std::atomic<std::uint64_t> expired_{0};
  std::atomic<std::uint64_t> slo_misses_{0};

  Histogram* latency_hist_ = nullptr;
  Gauge* max_batch_gauge_ = nullptr;
  Counter* batch_counter_ = nullptr;
};

}  // namespace predserve::model
