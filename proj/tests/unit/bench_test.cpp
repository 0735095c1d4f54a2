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


#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "predserve/bench/clock_oracle.hpp"
#include "predserve/bench/deployment.hpp"
#include "predserve/bench/experiments.hpp"
#include "predserve/bench/pause_detector.hpp"
#include "predserve/bench/report.hpp"
#include "predserve/bench/simulator.hpp"
#include "predserve/bench/synthetic.hpp"
#include "predserve/bench/workload.hpp"
#include "predserve/core/errors.hpp"
#include "predserve/model/prediction_cache.hpp"

using namespace predserve;
using namespace predserve::bench;

namespace {

Duration ms(double v) { return from_millis(v); }

SimOptions fixed_sim(std::uint32_t max_batch, double latency_ms, double slo_ms) {
  SimOptions o;
  o.batching.strategy = model::BatchStrategy::kFixed;
  o.batching.max_batch_size = max_batch;
  o.query_slo = ms(slo_ms);
  o.batch_slo = ms(slo_ms);
  o.latency = [latency_ms](std::uint32_t) { return ms(latency_ms); };
  return o;
}

}  // namespace

TEST_CASE("workload streams are reproducible from the seed") {
  WorkloadSpec spec;
  spec.arrival = Poisson{500};
  spec.duration = ms(2000);
  spec.feedback_fraction = 0.25;
  spec.popularity = Zipf{1.1, 1000};
  const auto a = generate_workload(spec, 11);
  const auto b = generate_workload(spec, 11);
  const auto c = generate_workload(spec, 12);
  CHECK(encode_workload(a) == encode_workload(b));
  CHECK(encode_workload(a) != encode_workload(c));
  REQUIRE(a.size() > 500);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].offset <= a[i].offset);
  CHECK(a.back().offset < ms(2000));
}

TEST_CASE("poisson arrivals match the requested rate") {
  WorkloadSpec spec;
  spec.arrival = Poisson{1000};
  spec.duration = ms(20000);
  const auto events = generate_workload(spec, 3);
  // 20000 expected arrivals, standard deviation about 141.
  CHECK(std::abs(static_cast<double>(events.size()) - 20000.0) < 700.0);
  double gaps = 0, gaps_sq = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const double g = to_millis(events[i].offset - events[i - 1].offset);
    gaps += g;
    gaps_sq += g * g;
  }
  const double n = static_cast<double>(events.size() - 1);
  const double mean = gaps / n;
  // Exponential gaps: variance equals the squared mean.
  CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
  CHECK(gaps_sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("burst arrivals alternate between the two rates") {
  WorkloadSpec spec;
  spec.arrival = Burst{2000, 200, ms(1000)};
  spec.duration = ms(10000);
  const auto events = generate_workload(spec, 5);
  std::size_t on = 0, off = 0;
  for (const auto& e : events) {
    (std::fmod(to_millis(e.offset), 1000.0) < 500.0 ? on : off) += 1;
  }
  // 10000 and 1000 expected.
  CHECK(std::abs(static_cast<double>(on) - 10000.0) < 500.0);
  CHECK(std::abs(static_cast<double>(off) - 1000.0) < 150.0);
}

TEST_CASE("unique items and zipf popularity") {
  WorkloadSpec spec;
  spec.arrival = ClosedLoop{4};
  spec.query_count = 50000;
  auto events = generate_workload(spec, 1);
  REQUIRE(events.size() == 50000);
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].item == i);

  spec.popularity = Zipf{1.0, 10};
  events = generate_workload(spec, 1);
  std::vector<double> counts(10, 0);
  for (const auto& e : events) counts.at(e.item) += 1;
  double h = 0;
  for (int i = 1; i <= 10; ++i) h += 1.0 / i;
  for (int i = 0; i < 10; ++i) {
    CHECK(counts[i] / 50000.0 == doctest::Approx(1.0 / ((i + 1) * h)).epsilon(0.05));
  }
}

TEST_CASE("invalid workload specs are rejected") {
  WorkloadSpec spec;
  spec.arrival = ClosedLoop{1};
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec.query_count = 10;
  spec.feedback_fraction = 1.5;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec.feedback_fraction = 0;
  spec.arrival = Poisson{-1};
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

TEST_CASE("labelled inputs and synthetic outputs") {
  const auto input = labelled_input(123456, 1);
  const auto back = decode_labelled_input(input);
  CHECK(back.query_index == 123456);
  CHECK(back.truth == 1);

  SyntheticModelSpec spec;
  spec.error_rate = 0.3;
  spec.seed = 9;
  std::size_t errors = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const bool errs = synthetic_errs(spec, i);
    errors += errs;
    CHECK(synthetic_output(spec, i, 0) == (errs ? "1" : "0"));
    CHECK(synthetic_errs(spec, i) == errs);
  }
  CHECK(static_cast<double>(errors) / 20000.0 == doctest::Approx(0.3).epsilon(0.05));

  spec.error_schedule = {{100, 200, 1.0}};
  CHECK(error_rate_at(spec, 99) == doctest::Approx(0.3));
  CHECK(error_rate_at(spec, 100) == 1.0);
  CHECK(error_rate_at(spec, 200) == doctest::Approx(0.3));
  for (std::uint64_t i = 100; i < 200; ++i) CHECK(synthetic_errs(spec, i));
}

TEST_CASE("simulator follows a hand trace") {
  // Batches of at most 2, 10 ms each; arrivals at 0, 0, 0, 5 and 30 ms.
  const std::vector<Duration> arrivals{ms(0), ms(0), ms(0), ms(5), ms(30)};
  const auto r = simulate_replica(arrivals, fixed_sim(2, 10, 20));
  REQUIRE(r.batches.size() == 3);
  CHECK(r.batches[0].start == ms(0));
  CHECK(r.batches[0].size == 2);
  CHECK(r.batches[1].start == ms(10));
  CHECK(r.batches[1].size == 2);
  CHECK(r.batches[2].start == ms(30));
  CHECK(r.batches[2].size == 1);
  CHECK(r.query_latency[0] == ms(10));
  CHECK(r.query_latency[2] == ms(20));
  CHECK(r.query_latency[3] == ms(15));
  CHECK(r.query_latency[4] == ms(10));
  CHECK(r.served == 5);
  CHECK(r.expired == 0);
  CHECK(r.end == ms(40));
  CHECK(r.throughput() == doctest::Approx(125.0));
}

TEST_CASE("simulator skips expired queries") {
  const std::vector<Duration> arrivals{ms(0), ms(0), ms(0), ms(0)};
  const auto r = simulate_replica(arrivals, fixed_sim(2, 10, 10));
  CHECK(r.served == 2);
  CHECK(r.expired == 2);
  CHECK_FALSE(r.query_latency[2].has_value());
  CHECK(r.query_batch_size[3] == 0);
}

TEST_CASE("simulator delays dispatch to fill a batch") {
  auto o = fixed_sim(4, 10, 50);
  o.batch_delay = ms(4);
  const std::vector<Duration> arrivals{ms(0), ms(1), ms(3), ms(6)};
  const auto r = simulate_replica(arrivals, o);
  REQUIRE(r.batches.size() == 2);
  CHECK(r.batches[0].start == ms(4));
  CHECK(r.batches[0].size == 3);
  // The second batch waits the full delay after the first completes.
  CHECK(r.batches[1].start == ms(18));
  CHECK(r.batches[1].size == 1);
}

TEST_CASE("textbook CLOCK oracle") {
  ClockOracle clock(2);
  const std::vector<std::uint64_t> keys{1, 2, 1, 3, 2, 3, 1};
  const std::vector<bool> expected{false, false, true, false, false, true, false};
  for (std::size_t i = 0; i < keys.size(); ++i) CHECK(clock.access(keys[i]) == expected[i]);
  CHECK(clock.hits() == 2);
  CHECK(clock.accesses() == 7);
}

TEST_CASE("prediction cache hit sequence equals the CLOCK oracle") {
  model::PredictionCache cache(16);
  ClockOracle oracle(16);
  std::mt19937_64 rng(4);
  ZipfSampler zipf(0.9, 64);
  const model::CacheWaiter ignore = [](const std::optional<Output>&) {};
  for (int i = 0; i < 5000; ++i) {
    const auto item = zipf(rng);
    const auto input = labelled_input(item, 0);
    const auto res = cache.lookup_or_subscribe("m", input, ignore);
    if (res == model::LookupResult::kMissStarted) cache.complete({"m", input}, Output("x"));
    CHECK((res == model::LookupResult::kHit) == oracle.access(item));
  }
}

TEST_CASE("report tables quote CSV fields") {
  Table t{"t", {"a", "b"}, {}};
  t.add({"plain", "with,comma"});
  t.add({"with \"quote\"", "line\nbreak"});
  CHECK(t.csv() == "a,b\nplain,\"with,comma\"\n\"with \"\"quote\"\"\",\"line\nbreak\"\n");
}

TEST_CASE("nearest-rank percentiles") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(101 - i);
  CHECK(percentile(v, 50) == 50);
  CHECK(percentile(v, 99) == 99);
  CHECK(percentile(v, 100) == 100);
  CHECK(percentile({}, 99) == 0);
  CHECK(percentile({7}, 1) == 7);
}

TEST_CASE("experiment reports write tables, summary and checks") {
  ExperimentReport r{"x", 1, {}, {}, {}};
  r.summary["k"] = 2.5;
  r.check("ok", true, "fine");
  CHECK(r.passed());
  CHECK(r.value("k") == 2.5);
  CHECK_THROWS_AS(r.value("missing"), NotFound);
  r.check("bad", false, "no");
  CHECK_FALSE(r.passed());
  const auto dir = std::filesystem::temp_directory_path() / "predserve_bench_report";
  std::filesystem::remove_all(dir);
  r.write(dir);
  CHECK(std::filesystem::exists(dir / "summary.csv"));
  std::ifstream checks(dir / "checks.csv");
  std::string all((std::istreambuf_iterator<char>(checks)), std::istreambuf_iterator<char>());
  CHECK(all.find("bad") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("experiment parameters") {
  CHECK(experiments().size() == 9);
  CHECK(find_experiment("cache-zipf").defaults.at("capacity") == 100);
  CHECK_THROWS_AS(find_experiment("nope"), NotFound);
  CHECK_THROWS_AS(run_experiment("cache-zipf", 1, {{"no_such_param", 1}}), InvalidArgument);

  const auto path = std::filesystem::temp_directory_path() / "predserve_bench_params.conf";
  {
    std::ofstream out(path);
    out << "[aimd-convergence]\nrate = 5000\n\n[cache-zipf]\nqueries = 10\n";
  }
  const auto p = load_params(path, "cache-zipf");
  CHECK(p.size() == 1);
  CHECK(p.at("queries") == 10);
  CHECK(load_params(path, "stragglers").empty());
  {
    std::ofstream out(path);
    out << "[cache-zipf]\nqueries = \"many\"\n";
  }
  CHECK_THROWS_AS(load_params(path, "cache-zipf"), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("aimd convergence runs deterministically") {
  const Params small{{"duration_s", 5}};
  const auto a = run_experiment("aimd-convergence", 3, small);
  const auto b = run_experiment("aimd-convergence", 3, small);
  CHECK(a.summary == b.summary);
}

TEST_CASE("pause detector stays quiet on an idle thread") {
  PauseDetector detector(ms(1000));
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  detector.stop();
  CHECK(detector.pauses() == 0);
  CHECK(detector.max_lateness() < ms(1000));
}

TEST_CASE("closed-loop driver keeps the requested concurrency") {
  frontend::RuntimeConfig config;
  AppConfig app;
  app.name = "a";
  app.input_type = InputType::kInts;
  app.slo = ms(200);
  app.policy = {"exp3", false};
  app.candidate_models = {"m0"};
  config.apps.push_back(app);
  frontend::ModelConfig m;
  m.name = "m0";
  m.input_type = InputType::kInts;
  config.models.push_back(m);
  SyntheticModelSpec spec;
  spec.latency_fixed = ms(1);

  for (const std::uint32_t concurrency : {1u, 3u}) {
    LocalDeployment deployment(config, {{"m0", spec}}, Transport::kInProcess, 1);
    WorkloadSpec w;
    w.arrival = ClosedLoop{concurrency};
    w.query_count = 60;
    w.feedback_fraction = 0.5;
    LoadDriver driver(deployment.core().frontend(), "a", generate_workload(w, 2), w.arrival,
                      [](std::uint64_t i) { return static_cast<std::uint32_t>(i % 2); });
    driver.start();
    driver.wait();
    CHECK(driver.issued() == 60);
    CHECK(driver.completed() == 60);
    CHECK(driver.max_in_flight() <= concurrency);
    const auto records = driver.records();
    REQUIRE(records.size() == 60);
    for (const auto& r : records) {
      CHECK(r.completed);
      CHECK_FALSE(r.prediction.is_default);
      CHECK(r.prediction.output.value == std::to_string(r.item % 2));
    }
    deployment.stop();
  }
}
