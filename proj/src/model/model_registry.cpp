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

#include "predserve/model/model_registry.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::model {

std::optional<std::size_t> choose_replica(std::span<const ReplicaLoad> replicas,
                                          std::uint64_t& cursor) {
  const std::size_t n = replicas.size();
  if (n == 0) return std::nullopt;
  bool any_healthy = false;
  for (const auto& r : replicas) any_healthy = any_healthy || r.healthy;

  // a.q / a.m < b.q / b.m  <=>  a.q * b.m < b.q * a.m
  auto less = [](const ReplicaLoad& a, const ReplicaLoad& b) {
    return static_cast<unsigned __int128>(a.queue_length) * b.max_batch <
           static_cast<unsigned __int128>(b.queue_length) * a.max_batch;
  };
  std::optional<std::size_t> best;
  const std::size_t start = cursor % n;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = (start + k) % n;
    if (any_healthy && !replicas[i].healthy) continue;
    if (!best || less(replicas[i], replicas[*best])) best = i;
  }
  cursor = *best + 1;
  return best;
}

ModelRegistry::ModelRegistry(PredictionCache& cache, MetricsRegistry* metrics)
    : cache_(cache), metrics_(metrics) {
  cache_.set_miss_handler([this](const CacheKey& key, TimePoint deadline) {
    try {
      dispatch(key, deadline);
    } catch (const ServingError& e) {
      spdlog::debug("cannot evaluate '{}': {}", key.model, e.what());
      cache_.fail(key);
    }
  });
}

ModelRegistry::~ModelRegistry() {
  cache_.set_miss_handler({});
  shutdown();
}

void ModelRegistry::add_model(ModelSpec spec) {
  std::lock_guard lock(mu_);
  if (models_.count(spec.name) != 0) {
    throw ConfigError(fmt::format("model '{}' declared twice", spec.name));
  }
  auto name = spec.name;
  models_.emplace(std::move(name), Model{std::move(spec), {}, 0});
}

bool ModelRegistry::has_model(const ModelName& name) const {
  std::lock_guard lock(mu_);
  return models_.count(name) != 0;
}

std::optional<InputType> ModelRegistry::input_type(const ModelName& name) const {
  std::lock_guard lock(mu_);
  auto it = models_.find(name);
  if (it == models_.end()) return std::nullopt;
  return it->second.spec.input_type;
}

std::string ModelRegistry::register_replica(
    const std::shared_ptr<rpc::ReplicaConnection>& conn) {
  const auto& hs = conn->handshake();
  Duration timeout;
  {
    std::lock_guard lock(mu_);
    auto it = models_.find(hs.model_name);
    if (it == models_.end()) return fmt::format("unknown model '{}'", hs.model_name);
    if (it->second.spec.input_type != hs.input_type) {
      return fmt::format("model '{}' expects {} inputs, container declared {}", hs.model_name,
                         input_type_name(it->second.spec.input_type),
                         input_type_name(hs.input_type));
    }
    timeout = it->second.spec.replica_timeout;
  }
  std::weak_ptr<rpc::ReplicaConnection> weak = conn;
  attach(
      hs.model_name, conn->id(),
      [weak, timeout](std::span<const InputPayload> inputs) {
        auto c = weak.lock();
        if (!c) throw ConnectionClosed("replica is gone");
        return c->predict(inputs, timeout);
      },
      [weak] {
        auto c = weak.lock();
        return c && !c->suspect() && !c->closed();
      });
  // The connection may have dropped before the worker was attached.
  if (conn->closed()) replica_closed(*conn);
  return {};
}

void ModelRegistry::replica_closed(const rpc::ReplicaConnection& conn) {
  if (auto worker = detach(conn.handshake().model_name, conn.id())) worker->stop();
}

std::uint64_t ModelRegistry::add_local_replica(const ModelName& model, BatchFn evaluate,
                                               std::function<bool()> healthy) {
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_local_id_++;
  }
  return attach(model, id, std::move(evaluate), std::move(healthy));
}

void ModelRegistry::remove_replica(const ModelName& model, std::uint64_t id) {
  if (auto worker = detach(model, id)) worker->stop();
}

std::uint64_t ModelRegistry::attach(const ModelName& model, std::uint64_t id, BatchFn evaluate,
                                    std::function<bool()> healthy) {
  std::shared_ptr<ReplicaWorker> worker;
  {
    std::lock_guard lock(mu_);
    if (shut_down_) throw Unavailable("registry is shut down");
    auto it = models_.find(model);
    if (it == models_.end()) throw NotFound(fmt::format("unknown model '{}'", model));
    worker = std::make_shared<ReplicaWorker>(model, id, it->second.spec.worker, cache_,
                                             std::move(evaluate), metrics_);
    worker->start();
    it->second.replicas.push_back({id, worker, std::move(healthy)});
  }
  cv_.notify_all();
  return id;
}

std::shared_ptr<ReplicaWorker> ModelRegistry::detach(const ModelName& model, std::uint64_t id) {
  std::lock_guard lock(mu_);
  auto it = models_.find(model);
  if (it == models_.end()) return nullptr;
  auto& reps = it->second.replicas;
  for (auto r = reps.begin(); r != reps.end(); ++r) {
    if (r->id == id) {
      auto worker = std::move(r->worker);
      reps.erase(r);
      return worker;
    }
  }
  return nullptr;
}

void ModelRegistry::dispatch(const CacheKey& key, TimePoint deadline) {
  std::shared_ptr<ReplicaWorker> target;
  {
    std::lock_guard lock(mu_);
    auto it = models_.find(key.model);
    if (it == models_.end()) throw NotFound(fmt::format("unknown model '{}'", key.model));
    auto& m = it->second;
    std::vector<ReplicaLoad> loads;
    loads.reserve(m.replicas.size());
    for (const auto& r : m.replicas) {
      const bool healthy = !r.worker->stopped() && (!r.healthy || r.healthy());
      loads.push_back({r.worker->queue_length(), r.worker->max_batch(), healthy});
    }
    auto idx = choose_replica(loads, m.cursor);
    if (!idx) throw ModelUnavailable(fmt::format("model '{}' has no connected replica", key.model));
    target = m.replicas[*idx].worker;
  }
  if (!target->enqueue({key, deadline, Clock::now()})) {
    throw ModelUnavailable(fmt::format("replica of '{}' is shutting down", key.model));
  }
}

std::size_t ModelRegistry::replica_count(const ModelName& model) const {
  std::lock_guard lock(mu_);
  auto it = models_.find(model);
  return it == models_.end() ? 0 : it->second.replicas.size();
}

bool ModelRegistry::wait_for_replicas(const ModelName& model, std::size_t n,
                                      Duration timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] {
    auto it = models_.find(model);
    return it != models_.end() && it->second.replicas.size() >= n;
  });
}

std::vector<ReplicaStatus> ModelRegistry::status(const ModelName& model) const {
  std::lock_guard lock(mu_);
  std::vector<ReplicaStatus> out;
  auto it = models_.find(model);
  if (it == models_.end()) return out;
  for (const auto& r : it->second.replicas) {
    out.push_back({r.id, r.worker->queue_length(), r.worker->max_batch(),
                   !r.worker->stopped() && (!r.healthy || r.healthy())});
  }
  return out;
}

std::vector<ModelName> ModelRegistry::models() const {
  std::lock_guard lock(mu_);
  std::vector<ModelName> out;
  for (const auto& [name, m] : models_) out.push_back(name);
  return out;
}

void ModelRegistry::set_batch_delay(const ModelName& model, Duration delay) {
  std::lock_guard lock(mu_);
  auto it = models_.find(model);
  if (it == models_.end()) throw NotFound(fmt::format("unknown model '{}'", model));
  it->second.spec.worker.batch_delay = delay;
  for (auto& r : it->second.replicas) r.worker->set_batch_delay(delay);
}

void ModelRegistry::shutdown() {
  std::vector<std::shared_ptr<ReplicaWorker>> workers;
  {
    std::lock_guard lock(mu_);
    shut_down_ = true;
    for (auto& [name, m] : models_) {
      for (auto& r : m.replicas) workers.push_back(std::move(r.worker));
      m.replicas.clear();
    }
  }
  for (auto& w : workers) w->stop();
}

}  // namespace predserve::model
