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

#include "predserve/bench/deployment.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::bench {

LocalDeployment::LocalDeployment(frontend::RuntimeConfig config,
                                 std::map<ModelName, SyntheticModelSpec> synthetic,
                                 Transport transport, std::uint64_t seed) {
  config.service.listen_addr = {"127.0.0.1", 0};
  config.service.container_port = 0;
  frontend::finalize_config(config);
  for (const auto& m : config.models) {
    if (synthetic.count(m.name) == 0) {
      throw InvalidArgument(fmt::format("no synthetic spec for model '{}'", m.name));
    }
  }
  core_ = std::make_unique<frontend::ServingCore>(config);
  std::uint64_t jitter_seed = seed;
  for (const auto& m : config.models) {
    auto model = std::make_shared<SyntheticModel>(synthetic.at(m.name), ++jitter_seed);
    models_[m.name] = model;
    if (transport == Transport::kInProcess) {
      core_->models().add_local_replica(m.name, [model](std::span<const InputPayload> in) {
        return model->predict(std::vector<InputPayload>(in.begin(), in.end()));
      });
      continue;
    }
    rpc::ContainerOptions opts;
    opts.core = {"127.0.0.1", core_->container_port()};
    opts.model_name = m.name;
    opts.input_type = m.input_type;
    opts.backoff_base = milliseconds(10);
    opts.backoff_cap = milliseconds(200);
    auto client = std::make_unique<rpc::ContainerClient>(
        opts, [model](const std::vector<InputPayload>& in) { return model->predict(in); });
    client->start();
    containers_[m.name] = std::move(client);
  }
  for (const auto& m : config.models) {
    if (!core_->models().wait_for_replicas(m.name, 1, seconds(10))) {
      throw Unavailable(fmt::format("container for '{}' did not register", m.name));
    }
  }
}

LocalDeployment::~LocalDeployment() { stop(); }

void LocalDeployment::stop() {
  if (!core_) return;
  core_->frontend().shutdown();
  for (auto& [name, c] : containers_) c->stop();
  core_->shutdown();
}

SyntheticModel& LocalDeployment::model(const ModelName& name) {
  auto it = models_.find(name);
  if (it == models_.end()) throw NotFound(fmt::format("no model '{}'", name));
  return *it->second;
}

rpc::ContainerClient& LocalDeployment::container(const ModelName& name) {
  auto it = containers_.find(name);
  if (it == containers_.end()) throw NotFound(fmt::format("no container for '{}'", name));
  return *it->second;
}

std::vector<ModelName> LocalDeployment::model_names() const {
  std::vector<ModelName> out;
  for (const auto& [name, m] : models_) out.push_back(name);
  return out;
}

LoadDriver::LoadDriver(frontend::QueryProcessor& frontend, std::string app,
                       std::vector<QueryEvent> events, Arrival arrival, TruthFn truth)
    : frontend_(frontend),
      app_(std::move(app)),
      events_(std::move(events)),
      arrival_(arrival),
      truth_(std::move(truth)),
      records_(events_.size()) {}

LoadDriver::~LoadDriver() { stop(); }

void LoadDriver::start() {
  start_ = Clock::now();
  thread_ = std::thread([this] { run(); });
}

void LoadDriver::stop() {
  stopping_ = true;
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return completed_.load() == issued_.load(); });
  if (end_ == TimePoint{}) end_ = Clock::now();
}

void LoadDriver::wait() {
  if (thread_.joinable()) thread_.join();
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return completed_.load() == issued_.load(); });
  if (end_ == TimePoint{}) end_ = Clock::now();
}

Duration LoadDriver::elapsed() const {
  std::lock_guard lock(mu_);
  return (end_ == TimePoint{} ? Clock::now() : end_) - start_;
}

std::vector<QueryRecord> LoadDriver::records() const {
  std::lock_guard lock(mu_);
  return {records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(issued_.load())};
}

void LoadDriver::run() {
  const auto* closed = std::get_if<ClosedLoop>(&arrival_);
  for (std::size_t i = 0; i < events_.size() && !stopping_; ++i) {
    if (closed != nullptr) {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || in_flight_.load() < closed->concurrency; });
      if (stopping_) break;
    } else {
      std::unique_lock lock(mu_);
      if (cv_.wait_until(lock, start_ + events_[i].offset, [&] { return stopping_.load(); })) break;
    }
    issue(i);
  }
}

void LoadDriver::issue(std::size_t i) {
  const auto& e = events_[i];
  const auto truth = truth_(e.item);
  auto input = labelled_input(e.item, truth);
  records_[i].item = e.item;
  records_[i].issued = Clock::now() - start_;
  {
    std::lock_guard lock(mu_);
    issued_ += 1;
    const auto now = ++in_flight_;
    if (now > max_in_flight_) max_in_flight_ = now;
  }
  try {
    frontend_.predict_async(app_, "", input,
                            [this, i](const frontend::PredictResult& r) { on_done(i, r); });
  } catch (const std::exception&) {
    frontend::PredictResult failed;
    failed.prediction.is_default = true;
    on_done(i, failed);
  }
  if (e.feedback) {
    try {
      frontend_.feedback({app_, "", std::move(input), Output(std::to_string(truth))});
    } catch (const Unavailable&) {
      feedback_refused_ += 1;
    }
  }
}

void LoadDriver::on_done(std::size_t i, const frontend::PredictResult& r) {
  const auto now = Clock::now();
  auto& rec = records_[i];
  rec.latency = now - start_ - rec.issued;
  rec.prediction = r.prediction;
  rec.completed = true;
  {
    std::lock_guard lock(mu_);
    in_flight_ -= 1;
    completed_ += 1;
  }
  cv_.notify_all();
}

}  // namespace predserve::bench
