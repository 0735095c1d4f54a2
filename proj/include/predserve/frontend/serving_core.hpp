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

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "predserve/core/metrics.hpp"
#include "predserve/frontend/config.hpp"
#include "predserve/frontend/query_processor.hpp"
#include "predserve/model/model_registry.hpp"
#include "predserve/model/prediction_cache.hpp"
#include "predserve/rpc/container_server.hpp"
#include "predserve/selection/state_store.hpp"

namespace predserve::frontend {

model::ModelSpec model_spec(const ModelConfig& m);

// One serving process: prediction cache, model registry with its dispatch
// workers, the container listener, the context store and the query path.
class ServingCore {
 public:
  // Listens for containers on config.service.container_port (0 picks a free
  // port) bound to the listen address host.
  explicit ServingCore(RuntimeConfig config, rpc::LivenessOptions liveness = {});
  ~ServingCore();

  ServingCore(const ServingCore&) = delete;
  ServingCore& operator=(const ServingCore&) = delete;

  QueryProcessor& frontend() noexcept { return *frontend_; }
  model::ModelRegistry& models() noexcept { return *registry_; }
  model::PredictionCache& cache() noexcept { return *cache_; }
  MetricsRegistry& metrics() noexcept { return metrics_; }
  std::uint16_t container_port() const;
  RuntimeConfig config() const;

  // Applies the hot-reloadable fields (confidence_threshold, batch_delay_ms)
  // of a freshly loaded config. Returns one line per applied change.
  std::vector<std::string> reload(const RuntimeConfig& fresh);

  std::string render_metrics();

  // Answers in-flight queries, disconnects containers and fails queued work.
  void shutdown();

 private:
  mutable std::mutex mu_;
  RuntimeConfig config_;
  MetricsRegistry metrics_;
  std::unique_ptr<model::PredictionCache> cache_;
  std::unique_ptr<selection::ContextStateStore> store_;
  std::unique_ptr<model::ModelRegistry> registry_;
  std::unique_ptr<QueryProcessor> frontend_;
  std::unique_ptr<rpc::ContainerServer> containers_;
  bool shut_down_ = false;
};

}  // namespace predserve::frontend
