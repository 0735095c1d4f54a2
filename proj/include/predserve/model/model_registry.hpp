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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "predserve/core/metrics.hpp"
#include "predserve/core/types.hpp"
#include "predserve/model/prediction_cache.hpp"
#include "predserve/model/replica_worker.hpp"
#include "predserve/rpc/connection.hpp"

namespace predserve::model {

struct ReplicaLoad {
  std::size_t queue_length = 0;
  std::uint32_t max_batch = 1;
  bool healthy = true;
};

// Picks the replica with the smallest queue_length / max_batch, preferring
// healthy replicas. Ties go round-robin, advancing cursor.
std::optional<std::size_t> choose_replica(std::span<const ReplicaLoad> replicas,
                                          std::uint64_t& cursor);

struct ModelSpec {
  ModelName name;
  InputType input_type = InputType::kDoubles;
  WorkerOptions worker;
  // Wait bound for one batch before the replica is marked suspect.
  Duration replica_timeout{seconds(1)};
};

struct ReplicaStatus {
  std::uint64_t id = 0;
  std::size_t queue_length = 0;
  std::uint32_t max_batch = 1;
  bool healthy = true;
};

// Deployed models and their replicas. Installs itself as the cache's miss
// handler: each miss is routed to one replica's dispatch worker, or failed
// when the model has no replica.
class ModelRegistry {
 public:
  ModelRegistry(PredictionCache& cache, MetricsRegistry* metrics = nullptr);
  ~ModelRegistry();

  ModelRegistry(const ModelRegistry&) = delete;
  ModelRegistry& operator=(const ModelRegistry&) = delete;

  // Throws ConfigError on a duplicate name.
  void add_model(ModelSpec spec);
  bool has_model(const ModelName& name) const;
  std::optional<InputType> input_type(const ModelName& name) const;

  // Container connection hooks. Returns a rejection reason, empty to accept.
  std::string register_replica(const std::shared_ptr<rpc::ReplicaConnection>& conn);
  void replica_closed(const rpc::ReplicaConnection& conn);

  // Attaches an in-process replica. Returns its id.
  std::uint64_t add_local_replica(const ModelName& model, BatchFn evaluate,
                                  std::function<bool()> healthy = {});
  void remove_replica(const ModelName& model, std::uint64_t id);

  // Routes one evaluation. Throws NotFound or ModelUnavailable.
  void dispatch(const CacheKey& key, TimePoint deadline);

  std::size_t replica_count(const ModelName& model) const;
  bool wait_for_replicas(const ModelName& model, std::size_t n, Duration timeout) const;
  std::vector<ReplicaStatus> status(const ModelName& model) const;
  std::vector<ModelName> models() const;

  // Hot-reloadable.
  void set_batch_delay(const ModelName& model, Duration delay);

  // Stops every worker; queued evaluations fail.
  void shutdown();

 private:
  struct Replica {
    std::uint64_t id;
    std::shared_ptr<ReplicaWorker> worker;
    std::function<bool()> healthy;
  };
  struct Model {
    ModelSpec spec;
    std::vector<Replica> replicas;
    std::uint64_t cursor = 0;
  };

  std::uint64_t attach(const ModelName& model, std::uint64_t id, BatchFn evaluate,
                       std::function<bool()> healthy);
  std::shared_ptr<ReplicaWorker> detach(const ModelName& model, std::uint64_t id);

  PredictionCache& cache_;
  MetricsRegistry* metrics_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<ModelName, Model> models_;
  std::uint64_t next_local_id_ = 1ULL << 48;
  bool shut_down_ = false;
};

}  // namespace predserve::model
