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

#include "predserve/frontend/serving_core.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::frontend {

model::ModelSpec model_spec(const ModelConfig& m) {
  model::ModelSpec spec;
  spec.name = m.name;
  spec.input_type = m.input_type;
  spec.replica_timeout = m.replica_timeout;
  spec.worker.batch_slo = m.batch_slo;
  spec.worker.batch_delay = m.batch_delay;
  spec.worker.batching.strategy = m.batch_strategy;
  spec.worker.batching.additive_step = m.additive_step;
  spec.worker.batching.max_batch_size = m.max_batch_size;
  return spec;
}

ServingCore::ServingCore(RuntimeConfig config, rpc::LivenessOptions liveness)
    : config_(std::move(config)) {
  finalize_config(config_);
  cache_ = std::make_unique<model::PredictionCache>(config_.cache.capacity);
  if (config_.store.backend == "file") {
    store_ = std::make_unique<selection::FileStateStore>(config_.store.path,
                                                         config_.store.max_contexts);
  } else {
    store_ = std::make_unique<selection::InMemoryStateStore>(config_.store.max_contexts);
  }
  registry_ = std::make_unique<model::ModelRegistry>(*cache_, &metrics_);
  for (const auto& m : config_.models) registry_->add_model(model_spec(m));

  FrontendOptions options;
  options.seed = config_.service.seed;
  options.combine_margin = config_.service.combine_margin;
  options.feedback_queue = config_.service.feedback_queue;
  frontend_ = std::make_unique<QueryProcessor>(config_.apps, *cache_, *store_, metrics_, options);

  containers_ = std::make_unique<rpc::ContainerServer>(
      rpc::HostPort{config_.service.listen_addr.host, config_.service.container_port}, liveness);
  containers_->start(
      [this](std::shared_ptr<rpc::ReplicaConnection> conn) {
        return registry_->register_replica(conn);
      },
      [this](std::shared_ptr<rpc::ReplicaConnection> conn) { registry_->replica_closed(*conn); });
}

ServingCore::~ServingCore() { shutdown(); }

void ServingCore::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (shut_down_) return;
    shut_down_ = true;
  }
  frontend_->shutdown();
  containers_->stop();
  registry_->shutdown();
}

std::uint16_t ServingCore::container_port() const { return containers_->port(); }

RuntimeConfig ServingCore::config() const {
  std::lock_guard lock(mu_);
  return config_;
}

std::vector<std::string> ServingCore::reload(const RuntimeConfig& fresh) {
  std::lock_guard lock(mu_);
  std::vector<std::string> changes;
  for (const auto& app : fresh.apps) {
    auto current = std::find_if(config_.apps.begin(), config_.apps.end(),
                                [&](const AppConfig& a) { return a.name == app.name; });
    if (current == config_.apps.end()) {
      spdlog::warn("reload: ignoring new app '{}' (restart required)", app.name);
      continue;
    }
    if (current->confidence_threshold != app.confidence_threshold) {
      frontend_->set_confidence_threshold(app.name, app.confidence_threshold);
      changes.push_back(fmt::format("app '{}' confidence_threshold {} -> {}", app.name,
                                    current->confidence_threshold, app.confidence_threshold));
      current->confidence_threshold = app.confidence_threshold;
    }
  }
  for (const auto& m : fresh.models) {
    auto current = std::find_if(config_.models.begin(), config_.models.end(),
                                [&](const ModelConfig& x) { return x.name == m.name; });
    if (current == config_.models.end()) {
      spdlog::warn("reload: ignoring new model '{}' (restart required)", m.name);
      continue;
    }
    if (current->batch_delay != m.batch_delay) {
      registry_->set_batch_delay(m.name, m.batch_delay);
      changes.push_back(fmt::format("model '{}' batch_delay_ms {} -> {}", m.name,
                                    to_millis(current->batch_delay), to_millis(m.batch_delay)));
      current->batch_delay = m.batch_delay;
    }
  }
  for (const auto& c : changes) spdlog::info("reload: {}", c);
  return changes;
}

std::string ServingCore::render_metrics() {
  metrics_.gauge("cache_requests").set(static_cast<double>(cache_->requests()));
  metrics_.gauge("cache_hits").set(static_cast<double>(cache_->hits()));
  metrics_.gauge("cache_misses").set(static_cast<double>(cache_->misses()));
  metrics_.gauge("cache_evictions").set(static_cast<double>(cache_->evictions()));
  metrics_.gauge("cache_entries").set(static_cast<double>(cache_->size()));
  metrics_.gauge("feedback_in_flight").set(static_cast<double>(frontend_->feedback_in_flight()));
  metrics_.gauge("container_connections").set(static_cast<double>(containers_->connection_count()));
  return metrics_.render();
}

}  // namespace predserve::frontend
