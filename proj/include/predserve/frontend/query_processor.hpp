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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "predserve/core/metrics.hpp"
#include "predserve/core/types.hpp"
#include "predserve/frontend/timer_service.hpp"
#include "predserve/model/prediction_cache.hpp"
#include "predserve/selection/policy.hpp"
#include "predserve/selection/state_store.hpp"

namespace predserve::frontend {

struct FrontendOptions {
  std::uint64_t seed = 0;
  // Time reserved before the deadline for combining and replying.
  Duration combine_margin{milliseconds(1)};
  // Feedback accepted but not yet applied, beyond which feedback is refused.
  std::size_t feedback_queue = 10000;
};

struct PredictResult {
  FinalPrediction prediction;
  Duration latency{};
};

// The per-query request path: selection, cache lookups that start container
// evaluations on a miss, and a single combine at the deadline or once every
// selected model has answered. Also runs the asynchronous feedback path.
class QueryProcessor {
 public:
  using Callback = std::function<void(const PredictResult&)>;

  QueryProcessor(std::vector<AppConfig> apps, model::PredictionCache& cache,
                 selection::ContextStateStore& store, MetricsRegistry& metrics,
                 FrontendOptions options = {});
  ~QueryProcessor();

  QueryProcessor(const QueryProcessor&) = delete;
  QueryProcessor& operator=(const QueryProcessor&) = delete;

  // Throws NotFound for an unknown app and InvalidArgument for an input of
  // the wrong type. Otherwise the callback runs exactly once.
  void predict_async(const std::string& app, const std::string& context, InputPayload input,
                     Callback done);
  PredictResult predict(const std::string& app, const std::string& context, InputPayload input);

  // Queues the feedback and returns. Throws NotFound, InvalidArgument, or
  // Unavailable when the feedback backlog is full.
  void feedback(Feedback fb);
  // Feedback accepted but not yet applied.
  std::size_t feedback_in_flight() const noexcept { return feedback_in_flight_.load(); }
  bool wait_for_feedback_idle(Duration timeout) const;

  const AppConfig& app(const std::string& name) const;
  std::vector<std::string> app_names() const;
  void set_confidence_threshold(const std::string& app, double threshold);

  nlohmann::json describe_state(const std::string& app, const std::string& context);

  // Answers every in-flight query and stops accepting work.
  void shutdown();

 private:
  struct App {
    AppConfig config;
    std::unique_ptr<selection::SelectionPolicy> policy;
  };
  struct QueryCtx;
  struct FeedbackCtx;

  std::shared_ptr<App> find_app(const std::string& name) const;
  selection::StateBlob load_state(const App& app, const std::string& context);
  void finish(const std::shared_ptr<QueryCtx>& ctx);
  void apply_feedback(const std::shared_ptr<FeedbackCtx>& ctx);

  model::PredictionCache& cache_;
  selection::ContextStateStore& store_;
  MetricsRegistry& metrics_;
  const FrontendOptions options_;

  mutable std::mutex apps_mu_;
  std::map<std::string, std::shared_ptr<App>> apps_;

  std::mutex rng_mu_;
  selection::Rng rng_;

  TimerService timers_;
  std::atomic<bool> accepting_{true};
  std::atomic<std::size_t> feedback_in_flight_{0};
  mutable std::mutex idle_mu_;
  mutable std::condition_variable idle_cv_;

  Counter& predictions_;
  Counter& defaults_;
  Counter& missing_;
  Counter& feedback_accepted_;
  Counter& feedback_rejected_;
  Histogram& latency_;
};

}  // namespace predserve::frontend
