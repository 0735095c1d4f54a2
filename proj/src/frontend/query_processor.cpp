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

#include "predserve/frontend/query_processor.hpp"

#include <future>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::frontend {

struct QueryProcessor::QueryCtx {
  std::shared_ptr<App> app;
  Query query;
  selection::StateBlob state;
  std::vector<ModelName> selected;
  Callback done;

  std::mutex mu;
  OutputMap available;
  std::size_t outstanding = 0;
  bool subscribed = false;  // every selected model has been looked up
  std::atomic<bool> finished{false};
  std::atomic<TimerService::TimerId> timer{0};

  QueryCtx(std::shared_ptr<App> a, Query q) : app(std::move(a)), query(std::move(q)) {}
};

struct QueryProcessor::FeedbackCtx {
  std::shared_ptr<App> app;
  Feedback fb;
  Query query;

  std::mutex mu;
  OutputMap preds;
  std::size_t outstanding = 0;
  bool subscribed = false;
  std::atomic<bool> applied{false};
  std::atomic<TimerService::TimerId> timer{0};

  FeedbackCtx(std::shared_ptr<App> a, Feedback f, Query q)
      : app(std::move(a)), fb(std::move(f)), query(std::move(q)) {}
};

QueryProcessor::QueryProcessor(std::vector<AppConfig> apps, model::PredictionCache& cache,
                               selection::ContextStateStore& store, MetricsRegistry& metrics,
                               FrontendOptions options)
    : cache_(cache),
      store_(store),
      metrics_(metrics),
      options_(options),
      rng_(options.seed),
      predictions_(metrics.counter("predictions_total")),
      defaults_(metrics.counter("predictions_default_total")),
      missing_(metrics.counter("predictions_models_missing_total")),
      feedback_accepted_(metrics.counter("feedback_total")),
      feedback_rejected_(metrics.counter("feedback_rejected_total")),
      latency_(metrics.histogram("predict_latency_ms")) {
  for (auto& config : apps) {
    config.validate();
    auto policy = selection::make_policy(config);
    auto name = config.name;
    auto app = std::make_shared<App>(App{std::move(config), std::move(policy)});
    if (!apps_.emplace(name, std::move(app)).second) {
      throw ConfigError(fmt::format("app '{}' declared twice", name));
    }
  }
}

QueryProcessor::~QueryProcessor() { shutdown(); }

void QueryProcessor::shutdown() {
  accepting_ = false;
  timers_.shutdown();
}

std::shared_ptr<QueryProcessor::App> QueryProcessor::find_app(const std::string& name) const {
  std::lock_guard lock(apps_mu_);
  auto it = apps_.find(name);
  if (it == apps_.end()) throw NotFound(fmt::format("unknown application '{}'", name));
  return it->second;
}

const AppConfig& QueryProcessor::app(const std::string& name) const {
  return find_app(name)->config;
}

std::vector<std::string> QueryProcessor::app_names() const {
  std::lock_guard lock(apps_mu_);
  std::vector<std::string> out;
  for (const auto& [name, a] : apps_) out.push_back(name);
  return out;
}

void QueryProcessor::set_confidence_threshold(const std::string& name, double threshold) {
  if (!(threshold >= 0 && threshold <= 1)) {
    throw InvalidArgument("confidence_threshold must be in [0, 1]");
  }
  std::lock_guard lock(apps_mu_);
  auto it = apps_.find(name);
  if (it == apps_.end()) throw NotFound(fmt::format("unknown application '{}'", name));
  // In-flight queries keep the App they started with.
  auto config = it->second->config;
  config.confidence_threshold = threshold;
  auto policy = selection::make_policy(config);
  it->second = std::make_shared<App>(App{std::move(config), std::move(policy)});
}

selection::StateBlob QueryProcessor::load_state(const App& app, const std::string& context) {
  if (auto blob = store_.get({app.config.name, context})) return std::move(*blob);
  return app.policy->init();
}

nlohmann::json QueryProcessor::describe_state(const std::string& name, const std::string& context) {
  auto app = find_app(name);
  const auto blob = load_state(*app, context);
  auto out = app->policy->describe(blob);
  out["app"] = name;
  out["context"] = context;
  return out;
}

void QueryProcessor::predict_async(const std::string& app_name, const std::string& context,
                                   InputPayload input, Callback done) {
  const auto recv = Clock::now();
  auto app = find_app(app_name);
  if (input.type() != app->config.input_type) {
    throw InvalidArgument(fmt::format("application '{}' takes {} inputs, got {}", app_name,
                                      input_type_name(app->config.input_type),
                                      input_type_name(input.type())));
  }
  auto ctx = std::make_shared<QueryCtx>(app, Query(app_name, context, std::move(input), recv,
                                                   app->config.slo));
  ctx->done = std::move(done);
  if (!accepting_) {
    finish(ctx);
    return;
  }
  ctx->state = load_state(*app, context);
  {
    std::lock_guard lock(rng_mu_);
    ctx->selected = app->policy->select(ctx->state, ctx->query, rng_);
  }

  const bool straggler = app->config.straggler_mitigation;
  const TimePoint answer_by = straggler ? ctx->query.deadline - options_.combine_margin
                                        : recv + app->config.blocking_timeout;
  ctx->outstanding = ctx->selected.size();
  ctx->timer = timers_.schedule(answer_by, [this, ctx] { finish(ctx); });

  std::weak_ptr<QueryCtx> weak = ctx;
  for (const auto& model : ctx->selected) {
    cache_.lookup_or_subscribe(
        model, ctx->query.input,
        [this, weak, model](const std::optional<Output>& out) {
          auto c = weak.lock();
          if (!c) return;
          bool complete;
          {
            std::lock_guard lock(c->mu);
            if (out) c->available.emplace(model, *out);
            complete = --c->outstanding == 0 && c->subscribed;
          }
          if (complete) finish(c);
        },
        answer_by);
  }
  bool complete;
  {
    std::lock_guard lock(ctx->mu);
    ctx->subscribed = true;
    complete = ctx->outstanding == 0;
  }
  if (complete) finish(ctx);
}

void QueryProcessor::finish(const std::shared_ptr<QueryCtx>& ctx) {
  if (ctx->finished.exchange(true)) return;
  if (const auto id = ctx->timer.load(); id != 0) timers_.cancel(id);
  OutputMap available;
  {
    std::lock_guard lock(ctx->mu);
    available = ctx->available;
  }
  PredictResult result;
  try {
    if (ctx->selected.empty()) {
      result.prediction.output = ctx->app->config.default_output;
      result.prediction.is_default = true;
    } else {
      result.prediction =
          ctx->app->policy->combine(ctx->state, ctx->query, ctx->selected, available);
    }
  } catch (const std::exception& e) {
    spdlog::error("combine failed for app '{}': {}", ctx->query.app_name, e.what());
    result.prediction = FinalPrediction{};
    result.prediction.output = ctx->app->config.default_output;
    result.prediction.is_default = true;
    result.prediction.models_missing = static_cast<std::uint32_t>(ctx->selected.size());
  }
  result.latency = Clock::now() - ctx->query.recv_time;
  predictions_.increment();
  if (result.prediction.is_default) defaults_.increment();
  if (result.prediction.models_missing > 0) missing_.increment();
  latency_.observe(result.latency);
  if (ctx->done) ctx->done(result);
}

PredictResult QueryProcessor::predict(const std::string& app, const std::string& context,
                                      InputPayload input) {
  auto promise = std::make_shared<std::promise<PredictResult>>();
  auto future = promise->get_future();
  predict_async(app, context, std::move(input),
                [promise](const PredictResult& r) { promise->set_value(r); });
  return future.get();
}

void QueryProcessor::feedback(Feedback fb) {
  auto app = find_app(fb.app_name);
  if (fb.input.type() != app->config.input_type) {
    throw InvalidArgument(fmt::format("application '{}' takes {} inputs, got {}", fb.app_name,
                                      input_type_name(app->config.input_type),
                                      input_type_name(fb.input.type())));
  }
  if (!is_valid_utf8(fb.label.value)) throw InvalidArgument("label must be valid UTF-8");
  if (!accepting_) throw Unavailable("service is shutting down");
  std::size_t current = feedback_in_flight_.load();
  do {
    if (current >= options_.feedback_queue) {
      feedback_rejected_.increment();
      throw Unavailable("feedback backlog is full; retry later");
    }
  } while (!feedback_in_flight_.compare_exchange_weak(current, current + 1));
  feedback_accepted_.increment();

  const auto now = Clock::now();
  Query q(fb.app_name, fb.context_id, fb.input, now, app->config.slo);
  auto ctx = std::make_shared<FeedbackCtx>(app, std::move(fb), std::move(q));
  const auto& models = app->config.candidate_models;
  ctx->outstanding = models.size();
  // Evaluations missing from the cache are awaited for at most one SLO.
  ctx->timer = timers_.schedule(ctx->query.deadline, [this, ctx] { apply_feedback(ctx); });

  std::weak_ptr<FeedbackCtx> weak = ctx;
  for (const auto& model : models) {
    cache_.lookup_or_subscribe(
        model, ctx->fb.input,
        [this, weak, model](const std::optional<Output>& out) {
          auto c = weak.lock();
          if (!c) return;
          bool complete;
          {
            std::lock_guard lock(c->mu);
            if (out) c->preds.emplace(model, *out);
            complete = --c->outstanding == 0 && c->subscribed;
          }
          if (complete) apply_feedback(c);
        },
        ctx->query.deadline);
  }
  bool complete;
  {
    std::lock_guard lock(ctx->mu);
    ctx->subscribed = true;
    complete = ctx->outstanding == 0;
  }
  if (complete) apply_feedback(ctx);
}

void QueryProcessor::apply_feedback(const std::shared_ptr<FeedbackCtx>& ctx) {
  if (ctx->applied.exchange(true)) return;
  if (const auto id = ctx->timer.load(); id != 0) timers_.cancel(id);
  OutputMap preds;
  {
    std::lock_guard lock(ctx->mu);
    preds = ctx->preds;
  }
  try {
    const auto& policy = *ctx->app->policy;
    store_.update({ctx->fb.app_name, ctx->fb.context_id},
                  [&](const std::optional<selection::Blob>& current) {
                    const auto state = current ? *current : policy.init();
                    std::lock_guard lock(rng_mu_);
                    return policy.observe(state, ctx->query, ctx->fb.label, preds, rng_);
                  });
  } catch (const std::exception& e) {
    spdlog::error("feedback for app '{}' failed: {}", ctx->fb.app_name, e.what());
  }
  {
    std::lock_guard lock(idle_mu_);
    feedback_in_flight_ -= 1;
  }
  idle_cv_.notify_all();
}

bool QueryProcessor::wait_for_feedback_idle(Duration timeout) const {
  std::unique_lock lock(idle_mu_);
  return idle_cv_.wait_for(lock, timeout, [&] { return feedback_in_flight_.load() == 0; });
}

}  // namespace predserve::frontend
