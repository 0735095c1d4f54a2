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

#include "predserve/model/replica_worker.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::model {

ReplicaWorker::ReplicaWorker(ModelName model, std::uint64_t replica_id, WorkerOptions options,
                             PredictionCache& cache, BatchFn evaluate, MetricsRegistry* metrics)
    : model_(std::move(model)),
      replica_id_(replica_id),
      batch_slo_(options.batch_slo),
      cache_(cache),
      evaluate_(std::move(evaluate)),
      sizer_(options.batching),
      batch_delay_(options.batch_delay),
      max_batch_(sizer_.max_batch()) {
  if (metrics != nullptr) {
    const auto labels = fmt::format("{{model=\"{}\",replica=\"{}\"}}", model_, replica_id_);
    latency_hist_ = &metrics->histogram("batch_latency_ms" + labels);
    max_batch_gauge_ = &metrics->gauge("max_batch_size" + labels);
    batch_counter_ = &metrics->counter("batches_total" + labels);
    max_batch_gauge_->set(max_batch_.load());
  }
}

ReplicaWorker::~ReplicaWorker() { stop(); }

void ReplicaWorker::start() {
  thread_ = std::thread([this] { run(); });
}

void ReplicaWorker::stop() {
  std::vector<BatchTask> leftover;
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    leftover.assign(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
  }
  cv_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  stopped_ = true;
  fail_all(leftover);
}

bool ReplicaWorker::enqueue(BatchTask task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return false;
    if (task.enqueued == TimePoint{}) task.enqueued = Clock::now();
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
  return true;
}

std::size_t ReplicaWorker::queue_length() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void ReplicaWorker::set_batch_delay(Duration delay) {
  std::lock_guard lock(mu_);
  batch_delay_ = std::max(delay, Duration::zero());
}

void ReplicaWorker::fail_all(std::vector<BatchTask>& tasks) {
  for (auto& t : tasks) cache_.fail(t.key);
  tasks.clear();
}

void ReplicaWorker::run() {
  std::vector<BatchTask> batch;
  std::vector<BatchTask> expired;
  while (true) {
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) break;
      const std::uint32_t limit = max_batch_.load();
      if (batch_delay_ > Duration::zero() && queue_.size() < limit) {
        TimePoint earliest = TimePoint::max();
        for (const auto& t : queue_) earliest = std::min(earliest, t.deadline);
        const auto expected = sizer_.profile().last().value_or(LatencySample{}).latency;
        TimePoint until = Clock::now() + batch_delay_;
        if (earliest != TimePoint::max()) until = std::min(until, earliest - expected);
        cv_.wait_until(lock, until, [&] { return stopping_ || queue_.size() >= limit; });
        if (stopping_) break;
      }
      const auto now = Clock::now();
      while (!queue_.empty() && batch.size() < limit) {
        auto& front = queue_.front();
        if (front.deadline <= now) {
          expired.push_back(std::move(front));
        } else {
          batch.push_back(std::move(front));
        }
        queue_.pop_front();
      }
    }
    expired_ += expired.size();
    fail_all(expired);
    if (batch.empty()) continue;
    try {
      execute(batch);
    } catch (const ServingError& e) {
      if (e.code() == ErrorCode::kConnectionClosed || e.code() == ErrorCode::kProtocol) {
        spdlog::info("worker for '{}' replica {} stopping: {}", model_, replica_id_, e.what());
        fail_all(batch);
        std::lock_guard lock(mu_);
        stopping_ = true;
        break;
      }
      spdlog::debug("batch on '{}' replica {} failed: {}", model_, replica_id_, e.what());
      fail_all(batch);
    } catch (const std::exception& e) {
      spdlog::warn("batch on '{}' replica {} failed: {}", model_, replica_id_, e.what());
      fail_all(batch);
    }
    batch.clear();
  }
  std::vector<BatchTask> leftover;
  {
    std::lock_guard lock(mu_);
    leftover.assign(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
  }
  stopped_ = true;
  fail_all(leftover);
}

void ReplicaWorker::execute(std::vector<BatchTask>& batch) {
  std::vector<InputPayload> inputs;
  inputs.reserve(batch.size());
  for (const auto& t : batch) inputs.push_back(t.key.input);

  const auto n = static_cast<std::uint32_t>(batch.size());
  const auto start = Clock::now();
  std::vector<std::vector<std::string>> outputs;
  try {
    outputs = evaluate_(inputs);
  } catch (const ReplicaTimeout&) {
    // The batch took at least as long as the wait.
    const auto latency = Clock::now() - start;
    max_batch_ = sizer_.observe({n, latency}, batch_slo_);
    throw;
  }
  const auto latency = Clock::now() - start;

  max_batch_ = sizer_.observe({n, latency}, batch_slo_);
  batches_ += 1;
  dispatched_ += n;
  if (latency > batch_slo_) slo_misses_ += 1;
  if (latency_hist_ != nullptr) latency_hist_->observe(latency);
  if (max_batch_gauge_ != nullptr) max_batch_gauge_->set(max_batch_.load());
  if (batch_counter_ != nullptr) batch_counter_->increment();

  if (outputs.size() != batch.size()) {
    throw ProtocolError(fmt::format("{} outputs for a batch of {}", outputs.size(), batch.size()));
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (outputs[i].empty()) {
      cache_.fail(batch[i].key);
    } else {
      cache_.complete(batch[i].key, Output(std::move(outputs[i].front())));
    }
  }
  batch.clear();
}

}  // namespace predserve::model
