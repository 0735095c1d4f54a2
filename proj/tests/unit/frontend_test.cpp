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

#include <atomic>
#include <chrono>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "predserve/core/errors.hpp"
#include "predserve/frontend/config.hpp"
#include "predserve/frontend/http_service.hpp"
#include "predserve/frontend/serving_core.hpp"
#include "predserve/frontend/timer_service.hpp"
#include "predserve/rpc/container_client.hpp"

using namespace predserve;
using namespace predserve::frontend;
using nlohmann::json;

namespace {

Duration ms(double v) { return from_millis(v); }

std::string config_error(std::string_view text) {
  try {
    parse_config(text, "test.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

constexpr std::string_view kMinimal = R"(
[app.digits]
slo_ms = 20
input_type = "doubles"
models = ["a", "b"]

[model.a]
[model.b]
batch_strategy = "quantile"
)";

// Two-app deployment used by the query path tests. Ports are ephemeral.
RuntimeConfig two_apps(int n_models, double slo_ms, bool straggler = true) {
  RuntimeConfig c;
  c.service.listen_addr = {"127.0.0.1", 0};
  c.service.container_port = 0;
  c.service.seed = 7;
  AppConfig app;
  app.name = "vote";
  app.input_type = InputType::kString;
  app.slo = ms(slo_ms);
  app.policy = {"exp4", false};
  app.default_output = Output("none");
  app.straggler_mitigation = straggler;
  app.blocking_timeout = ms(400);
  for (int i = 0; i < n_models; ++i) {
    ModelConfig m;
    m.name = "m" + std::to_string(i);
    m.input_type = InputType::kString;
    m.batch_strategy = model::BatchStrategy::kFixed;
    m.max_batch_size = 16;
    c.models.push_back(m);
    app.candidate_models.push_back(m.name);
  }
  c.apps.push_back(app);
  AppConfig solo = app;
  solo.name = "solo";
  solo.policy = {"exp3", false};
  solo.candidate_models = {"m0"};
  c.apps.push_back(solo);
  return c;
}

// A local replica answering label after sleeping delay per batch.
model::BatchFn answer(std::string label, Duration delay = Duration::zero(),
                      std::atomic<int>* calls = nullptr) {
  return [label, delay, calls](std::span<const InputPayload> in) {
    if (calls) calls->fetch_add(static_cast<int>(in.size()));
    if (delay > Duration::zero()) std::this_thread::sleep_for(delay);
    return std::vector<std::vector<std::string>>(in.size(), {label});
  };
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST_CASE("minimal configuration parses with defaults") {
  const auto c = parse_config(kMinimal);
  REQUIRE(c.apps.size() == 1);
  const auto& app = c.apps[0];
  CHECK(app.name == "digits");
  CHECK(app.slo == ms(20));
  CHECK(app.policy.name == "exp3");
  CHECK(app.eta == doctest::Approx(0.1));
  CHECK(app.candidate_models == std::vector<ModelName>{"a", "b"});
  REQUIRE(c.models.size() == 2);
  CHECK(c.find_model("a")->batch_strategy == model::BatchStrategy::kAimd);
  CHECK(c.find_model("b")->batch_strategy == model::BatchStrategy::kQuantile);
  CHECK(c.find_model("a")->input_type == InputType::kDoubles);
  CHECK(c.find_model("a")->batch_slo == ms(18));
  CHECK(c.service.listen_addr.port == 8080);
  CHECK(c.service.container_port == 7000);
  CHECK(c.cache.capacity == 65536);
}

TEST_CASE("service, cache and selection sections") {
  const auto c = parse_config(R"(
# full example
[service]
listen_addr = "127.0.0.1:9000"
container_port = 7100
seed = 42

[cache]
capacity = 1024

[app.x]
slo_ms = 50
input_type = "string"
models = ["a"]
policy = "exp4"
eta = 0.05
default_output = "unknown"
confidence_threshold = 0.6

[model.a]
batch_delay_ms = 2.5
additive_step = 8
)");
  CHECK(c.service.listen_addr.host == "127.0.0.1");
  CHECK(c.service.listen_addr.port == 9000);
  CHECK(c.service.container_port == 7100);
  CHECK(c.service.seed == 42);
  CHECK(c.cache.capacity == 1024);
  const auto& app = c.apps[0];
  CHECK(app.policy.name == "exp4");
  CHECK(app.eta == doctest::Approx(0.05));
  CHECK(app.default_output.value == "unknown");
  CHECK(app.confidence_threshold == doctest::Approx(0.6));
  const auto* m = c.find_model("a");
  CHECK(m->batch_delay == ms(2.5));
  CHECK(m->additive_step == 8);
  CHECK(m->input_type == InputType::kString);
  CHECK(m->batch_slo == ms(45));
}

TEST_CASE("batch SLO follows the tightest application") {
  const auto c = parse_config(R"(
[app.fast]
slo_ms = 10
input_type = "ints"
models = ["shared"]
[app.slow]
slo_ms = 100
input_type = "ints"
models = ["shared", "own"]
[model.shared]
[model.own]
)");
  CHECK(c.find_model("shared")->batch_slo == ms(9));
  CHECK(c.find_model("own")->batch_slo == ms(90));
}

TEST_CASE("configuration errors name the key and line") {
  auto err = config_error(R"([app.x]
input_type = "doubles"
models = ["a"]
[model.a]
)");
  CHECK(err.find("test.toml:1") != std::string::npos);
  CHECK(err.find("slo_ms") != std::string::npos);

  err = config_error(R"([app.x]
slo_ms = 20
eta = 0
input_type = "doubles"
models = ["a"]
[model.a]
)");
  CHECK(err.find("test.toml:3") != std::string::npos);
  CHECK(err.find("eta") != std::string::npos);

  err = config_error(R"([app.x]
slo_ms = 20
input_type = "doubles"
models = ["a"]
colour = "blue"
[model.a]
)");
  CHECK(err.find("test.toml:5") != std::string::npos);
  CHECK(err.find("colour") != std::string::npos);

  CHECK(config_error(R"([app.x]
slo_ms = 20
input_type = "doubles"
models = ["ghost"]
)").find("ghost") != std::string::npos);

  CHECK(config_error(R"([app.x]
slo_ms = 20
input_type = "doubles"
models = ["a"]
[model.a]
[model.a]
)").find("test.toml:6") != std::string::npos);

  CHECK(config_error(R"([app.x]
slo_ms = 20
input_type = "doubles"
models = ["a"]
[app.y]
slo_ms = 20
input_type = "string"
models = ["a"]
[model.a]
)").find("model 'a'") != std::string::npos);

  CHECK(config_error("[app.x]\nslo_ms = 20\ninput_type = \"doubles\"\nmodels = [\"a\"]\n"
                     "[model.a]\nbatch_strategy = \"greedy\"\n")
            .find("test.toml:6") != std::string::npos);
  CHECK(config_error("[mystery]\n").find("unknown section") != std::string::npos);
  CHECK(config_error("[app.x]\nslo_ms = \n").find("test.toml:2") != std::string::npos);
  CHECK(config_error("slo_ms = 20\n").find("test.toml:1") != std::string::npos);
}

TEST_CASE("config file is read from disk") {
  CHECK_THROWS_AS(load_config("/nonexistent/predserve.toml"), ConfigError);
}

// ---------------------------------------------------------------------------
// Timers

TEST_CASE("timers fire in deadline order and can be cancelled") {
  TimerService timers;
  std::mutex mu;
  std::vector<int> order;
  std::promise<void> last;
  const auto now = Clock::now();
  auto record = [&](int v) {
    std::lock_guard lock(mu);
    order.push_back(v);
  };
  timers.schedule(now + ms(30), [&] { record(3); });
  timers.schedule(now + ms(10), [&] { record(1); });
  const auto doomed = timers.schedule(now + ms(20), [&] { record(2); });
  timers.schedule(now + ms(40), [&] {
    record(4);
    last.set_value();
  });
  CHECK(timers.cancel(doomed));
  CHECK_FALSE(timers.cancel(doomed));
  REQUIRE(last.get_future().wait_for(std::chrono::seconds(5)) == std::future_status::ready);
  CHECK(order == std::vector<int>{1, 3, 4});
  CHECK(timers.pending() == 0);
}

TEST_CASE("timer shutdown runs pending callbacks") {
  TimerService timers;
  std::atomic<int> ran{0};
  for (int i = 0; i < 5; ++i) timers.schedule(Clock::now() + std::chrono::hours(1), [&] { ++ran; });
  timers.shutdown();
  CHECK(ran == 5);
  timers.schedule(Clock::now() + std::chrono::hours(1), [&] { ++ran; });
  CHECK(ran == 6);
}

// ---------------------------------------------------------------------------
// Query path

TEST_CASE("ensemble answers once every model has replied") {
  ServingCore core(two_apps(3, 200));
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("cat"));
  core.models().add_local_replica("m2", answer("dog"));
  const auto r = core.frontend().predict("vote", "u1", InputPayload::from_string("img-1"));
  CHECK(r.prediction.output.value == "cat");
  CHECK(r.prediction.confidence == doctest::Approx(2.0 / 3.0));
  CHECK(r.prediction.models_used == 3);
  CHECK(r.prediction.models_missing == 0);
  CHECK_FALSE(r.prediction.is_default);
  CHECK(r.latency < ms(150));

  // Same input again is answered from the cache.
  const auto hits = core.cache().hits();
  core.frontend().predict("vote", "u1", InputPayload::from_string("img-1"));
  CHECK(core.cache().hits() == hits + 3);
}

TEST_CASE("a straggler is left out at the deadline") {
  ServingCore core(two_apps(3, 30));
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("cat"));
  core.models().add_local_replica("m2", answer("dog", ms(300)));
  for (int i = 0; i < 5; ++i) {
    const auto r = core.frontend().predict("vote", "", InputPayload::from_string(std::to_string(i)));
    // Answered at the deadline, long before the straggler.
    CHECK(r.latency >= ms(28));
    CHECK(r.latency < ms(150));
    CHECK(r.prediction.output.value == "cat");
    CHECK(r.prediction.models_missing == 1);
    CHECK(r.prediction.confidence == doctest::Approx(2.0 / 3.0));
  }
  core.shutdown();
}

TEST_CASE("blocking mode waits for the slow model") {
  ServingCore core(two_apps(2, 20, false));
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("dog", ms(60)));
  const auto r = core.frontend().predict("vote", "", InputPayload::from_string("x"));
  CHECK(r.latency >= ms(60));
  CHECK(r.prediction.models_missing == 0);
  CHECK(r.prediction.models_used == 2);
}

TEST_CASE("no live model yields the default output by the deadline") {
  ServingCore core(two_apps(2, 25));
  const auto r = core.frontend().predict("vote", "", InputPayload::from_string("x"));
  CHECK(r.prediction.is_default);
  CHECK(r.prediction.output.value == "none");
  CHECK(r.prediction.confidence == 0.0);
  CHECK(r.prediction.models_used == 0);
  CHECK(r.prediction.models_missing == 2);
  CHECK(r.latency <= ms(25));
}

TEST_CASE("confidence below the threshold falls back to the default") {
  auto config = two_apps(2, 200);
  config.apps[0].confidence_threshold = 0.9;
  ServingCore core(config);
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("dog"));
  auto r = core.frontend().predict("vote", "", InputPayload::from_string("x"));
  CHECK(r.prediction.is_default);
  CHECK(r.prediction.output.value == "none");

  auto fresh = config;
  fresh.apps[0].confidence_threshold = 0.0;
  fresh.models[1].batch_delay = ms(1);
  const auto changes = core.reload(fresh);
  CHECK(changes.size() == 2);
  r = core.frontend().predict("vote", "", InputPayload::from_string("y"));
  CHECK_FALSE(r.prediction.is_default);
}

TEST_CASE("request validation") {
  ServingCore core(two_apps(1, 50));
  CHECK_THROWS_AS(core.frontend().predict("nope", "", InputPayload::from_string("x")), NotFound);
  const std::vector<double> d{1.0};
  CHECK_THROWS_AS(core.frontend().predict("vote", "", InputPayload::from_doubles(d)),
                  InvalidArgument);
  CHECK_THROWS_AS(core.frontend().feedback({"vote", "", InputPayload::from_doubles(d), Output("a")}),
                  InvalidArgument);
  CHECK_THROWS_AS(core.frontend().feedback({"nope", "", InputPayload::from_string("x"), Output("a")}),
                  NotFound);
}

TEST_CASE("feedback updates the context state only") {
  ServingCore core(two_apps(2, 100));
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("dog"));
  for (int i = 0; i < 20; ++i) {
    core.frontend().feedback({"vote", "alice", InputPayload::from_string(std::to_string(i)),
                              Output("cat")});
  }
  REQUIRE(core.frontend().wait_for_feedback_idle(std::chrono::seconds(10)));
  const auto alice = core.frontend().describe_state("vote", "alice");
  const auto bob = core.frontend().describe_state("vote", "bob");
  CHECK(alice["query_count"] == 20);
  CHECK(bob["query_count"] == 0);
  const double w0 = alice["models"]["m0"]["weight"];
  const double w1 = alice["models"]["m1"]["weight"];
  CHECK(w0 + w1 == doctest::Approx(2.0));
  CHECK(w0 > w1);
  CHECK(bob["models"]["m0"]["weight"] == doctest::Approx(1.0));
  CHECK(core.metrics().counter("feedback_total").value() == 20);
}

TEST_CASE("feedback is refused when the backlog is full") {
  auto config = two_apps(1, 500);
  config.service.feedback_queue = 3;
  ServingCore core(config);
  core.models().add_local_replica("m0", answer("cat", ms(200)));
  int refused = 0;
  for (int i = 0; i < 6; ++i) {
    try {
      core.frontend().feedback({"vote", "", InputPayload::from_string(std::to_string(i)),
                                Output("cat")});
    } catch (const Unavailable&) {
      ++refused;
    }
  }
  CHECK(refused == 3);
  CHECK(core.frontend().feedback_in_flight() == 3);
  CHECK(core.metrics().counter("feedback_rejected_total").value() == 3);
  REQUIRE(core.frontend().wait_for_feedback_idle(std::chrono::seconds(10)));
  CHECK(core.frontend().describe_state("vote", "")["query_count"] == 3);
}

TEST_CASE("feedback on cached predictions skips evaluation") {
  ServingCore core(two_apps(1, 100));
  std::atomic<int> calls{0};
  core.models().add_local_replica("m0", answer("cat", ms(5), &calls), {});
  const auto input = InputPayload::from_string("seen");
  core.frontend().predict("vote", "", input);
  CHECK(calls == 1);
  core.frontend().feedback({"vote", "", input, Output("cat")});
  REQUIRE(core.frontend().wait_for_feedback_idle(std::chrono::seconds(5)));
  CHECK(calls == 1);
  core.frontend().feedback({"vote", "", InputPayload::from_string("new"), Output("cat")});
  REQUIRE(core.frontend().wait_for_feedback_idle(std::chrono::seconds(5)));
  CHECK(calls == 2);
}

TEST_CASE("shutdown answers in-flight queries") {
  ServingCore core(two_apps(1, 5000));
  core.models().add_local_replica("m0", answer("cat", ms(2000)));
  std::promise<PredictResult> result;
  core.frontend().predict_async("vote", "", InputPayload::from_string("x"),
                                [&](const PredictResult& r) { result.set_value(r); });
  std::this_thread::sleep_for(ms(20));
  core.shutdown();
  auto f = result.get_future();
  REQUIRE(f.wait_for(std::chrono::seconds(5)) == std::future_status::ready);
  CHECK(f.get().prediction.models_missing == 1);
}

TEST_CASE("metrics stay consistent under concurrent load") {
  ServingCore core(two_apps(2, 100));
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("cat"));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        core.frontend().predict("vote", "", InputPayload::from_string(std::to_string(i % 10 + t)));
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(core.metrics().counter("predictions_total").value() == 200);
  CHECK(core.metrics().histogram("predict_latency_ms").count() == 200);
  CHECK(core.cache().hits() + core.cache().misses() == core.cache().requests());
  CHECK(core.cache().requests() == 400);
  const auto text = core.render_metrics();
  CHECK(text.find("predictions_total 200") != std::string::npos);
  CHECK(text.find("predict_latency_ms_count 200") != std::string::npos);
}

TEST_CASE("containers over loopback serve the query path") {
  ServingCore core(two_apps(1, 500));
  rpc::ContainerOptions opts;
  opts.core = {"127.0.0.1", core.container_port()};
  opts.model_name = "m0";
  opts.input_type = InputType::kString;
  rpc::ContainerClient client(opts, [](const std::vector<InputPayload>& in) {
    std::vector<std::vector<std::string>> out;
    for (const auto& x : in) out.push_back({"echo:" + x.as_string()});
    return out;
  });
  client.start();
  REQUIRE(core.models().wait_for_replicas("m0", 1, std::chrono::seconds(5)));
  const auto r = core.frontend().predict("vote", "", InputPayload::from_string("hi"));
  CHECK(r.prediction.output.value == "echo:hi");
  CHECK(r.prediction.models_missing == 0);
  client.stop();
  core.shutdown();
}

// ---------------------------------------------------------------------------
// HTTP

TEST_CASE("JSON inputs decode per input type") {
  CHECK(input_from_json(json("abc"), InputType::kString).as_string() == "abc");
  CHECK(input_from_json(json{1, -2, 3}, InputType::kInts).as_ints() ==
        std::vector<std::int32_t>{1, -2, 3});
  CHECK(input_from_json(json{0.5, 2}, InputType::kDoubles).as_doubles() ==
        std::vector<double>{0.5, 2.0});
  CHECK(input_from_json(json{0.5f}, InputType::kFloats).as_floats() == std::vector<float>{0.5f});
  CHECK(input_from_json(json{0, 255}, InputType::kBytes).size() == 2);
  CHECK(input_from_json(json("ab"), InputType::kBytes).size() == 2);
  CHECK_THROWS_AS(input_from_json(json{1.5}, InputType::kInts), InvalidArgument);
  CHECK_THROWS_AS(input_from_json(json{3e10}, InputType::kInts), InvalidArgument);
  CHECK_THROWS_AS(input_from_json(json{256}, InputType::kBytes), InvalidArgument);
  CHECK_THROWS_AS(input_from_json(json{1}, InputType::kString), InvalidArgument);
  CHECK_THROWS_AS(input_from_json(json("x"), InputType::kDoubles), InvalidArgument);
  CHECK_THROWS_AS(input_from_json(json::array(), InputType::kDoubles), InvalidArgument);
  CHECK(input_to_json(InputPayload::from_string("q")) == json("q"));
}

TEST_CASE("HTTP routes map errors to status codes") {
  auto config = two_apps(2, 100);
  ServingCore core(config);
  core.models().add_local_replica("m0", answer("cat"));
  core.models().add_local_replica("m1", answer("cat"));
  auto fresh = config;
  fresh.apps[0].confidence_threshold = 0.5;
  HttpService http(core, [&] { return fresh; });

  auto r = http.handle("POST", "/api/v1/predict", R"({"app":"vote","context_id":"u","input":"x"})");
  REQUIRE(r.status == 200);
  auto body = json::parse(r.body);
  CHECK(body["output"] == "cat");
  CHECK(body["confidence"] == 1.0);
  CHECK(body["is_default"] == false);
  CHECK(body["models_used"] == 2);
  CHECK(body["models_missing"] == 0);
  CHECK(body["latency_micros"].get<std::int64_t>() >= 0);

  CHECK(http.handle("POST", "/api/v1/predict", R"({"app":"nope","input":"x"})").status == 404);
  CHECK(http.handle("POST", "/api/v1/predict", R"({"app":"vote","input":[1]})").status == 400);
  CHECK(http.handle("POST", "/api/v1/predict", R"({"app":"vote"})").status == 400);
  CHECK(http.handle("POST", "/api/v1/predict", "{not json").status == 400);
  CHECK(http.handle("POST", "/api/v1/predict", "[1]").status == 400);
  CHECK(http.handle("GET", "/api/v1/nothing", "").status == 404);

  r = http.handle("POST", "/api/v1/feedback",
                  R"({"app":"vote","context_id":"u","input":"x","label":"cat"})");
  CHECK(r.status == 202);
  CHECK(http.handle("POST", "/api/v1/feedback", R"({"app":"vote","input":"x"})").status == 400);
  REQUIRE(core.frontend().wait_for_feedback_idle(std::chrono::seconds(5)));

  r = http.handle("GET", "/admin/state/vote/u", "");
  REQUIRE(r.status == 200);
  body = json::parse(r.body);
  CHECK(body["query_count"] == 1);
  CHECK(body["context"] == "u");
  CHECK(http.handle("GET", "/admin/state/nope/u", "").status == 404);

  r = http.handle("GET", "/metrics", "");
  CHECK(r.status == 200);
  CHECK(r.body.find("predictions_total 1") != std::string::npos);
  CHECK(r.body.find("feedback_total 1") != std::string::npos);

  r = http.handle("POST", "/admin/reload", "");
  CHECK(r.status == 200);
  CHECK(json::parse(r.body)["applied"].size() == 1);
  CHECK(core.frontend().app("vote").confidence_threshold == 0.5);

  HttpService no_reload(core);
  CHECK(no_reload.handle("POST", "/admin/reload", "").status == 404);
}

TEST_CASE("HTTP server answers over a socket") {
  ServingCore core(two_apps(1, 100));
  core.models().add_local_replica("m0", answer("7"));
  HttpService http(core, {}, 4);
  http.start({"127.0.0.1", 0});
  REQUIRE(http.port() != 0);
  httplib::Client client("127.0.0.1", http.port());
  auto res = client.Post("/api/v1/predict", R"({"app":"solo","input":"q"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["output"] == "7");
  res = client.Get("/metrics");
  REQUIRE(res);
  CHECK(res->body.find("predictions_total 1") != std::string::npos);
  res = client.Get("/no/such/route");
  REQUIRE(res);
  CHECK(res->status == 404);
  http.stop();
}
