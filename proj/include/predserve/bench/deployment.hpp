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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "predserve/bench/synthetic.hpp"
#include "predserve/bench/workload.hpp"
#include "predserve/frontend/config.hpp"
#include "predserve/frontend/serving_core.hpp"
#include "predserve/rpc/container_client.hpp"

namespace predserve::bench {

enum class Transport {
  kLoopback,   // containers speak the wire protocol over 127.0.0.1
  kInProcess,  // replicas call the synthetic model directly
};

// A serving core on ephemeral ports plus one synthetic container per model.
class LocalDeployment {
 public:
  // Every model in config.models needs an entry in synthetic. Blocks until
  // all containers have registered.
  LocalDeployment(frontend::RuntimeConfig config, std::map<ModelName, SyntheticModelSpec> synthetic,
                  Transport transport = Transport::kLoopback, std::uint64_t seed = 0);
  ~LocalDeployment();

  LocalDeployment(const LocalDeployment&) = delete;
  LocalDeployment& operator=(const LocalDeployment&) = delete;

  frontend::ServingCore& core() noexcept { return *core_; }
  SyntheticModel& model(const ModelName& name);
  // Loopback transport only.
  rpc::ContainerClient& container(const ModelName& name);
  std::vector<ModelName> model_names() const;

  void stop();

 private:
  std::unique_ptr<frontend::ServingCore> core_;
  std::map<ModelName, std::shared_ptr<SyntheticModel>> models_;
  std::map<ModelName, std::unique_ptr<rpc::ContainerClient>> containers_;
};

struct QueryRecord {
  std::uint64_t item = 0;
  Duration issued{0};  // offset from the driver start
  Duration latency{0};
  FinalPrediction prediction;
  bool completed = false;
};

// Maps a workload item to the index of its true label.
using TruthFn = std::function<std::uint32_t(std::uint64_t item)>;

// Issues a query stream against one application from a dedicated thread:
// at the event offsets for open-loop arrivals, or keeping `concurrency`
// queries in flight for closed-loop arrivals. Feedback events also send the
// true label as feedback.
class LoadDriver {
 public:
  LoadDriver(frontend::QueryProcessor& frontend, std::string app, std::vector<QueryEvent> events,
             Arrival arrival, TruthFn truth);
  ~LoadDriver();

  LoadDriver(const LoadDriver&) = delete;
  LoadDriver& operator=(const LoadDriver&) = delete;

  void start();
  // Stops issuing and waits for every issued query to complete.
  void stop();
  // Waits until the whole stream has been issued and answered.
  void wait();

  std::uint64_t issued() const noexcept { return issued_.load(); }
  std::uint64_t completed() const noexcept { return completed_.load(); }
  // Largest number of queries observed in flight at once.
  std::uint64_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  std::uint64_t feedback_refused() const noexcept { return feedback_refused_.load(); }
  Duration elapsed() const;
  TimePoint started_at() const noexcept { return start_; }
  // Records of issued queries, valid after stop() or wait().
  std::vector<QueryRecord> records() const;

 private:
  void run();
  void issue(std::size_t i);
  void on_done(std::size_t i, const frontend::PredictResult& r);

  frontend::QueryProcessor& frontend_;
  const std::string app_;
  const std::vector<QueryEvent> events_;
  const Arrival arrival_;
  const TruthFn truth_;

  std::vector<QueryRecord> records_;
  TimePoint start_{};
  TimePoint end_{};
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> issued_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::atomic<std::uint64_t> in_flight_{0};
  std::atomic<std::uint64_t> max_in_flight_{0};
  std::atomic<std::uint64_t> feedback_refused_{0};
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace predserve::bench
