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

#include <algorithm>
#include <barrier>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "common.hpp"
#include "predserve/bench/clock_oracle.hpp"
#include "predserve/bench/pause_detector.hpp"
#include "predserve/core/errors.hpp"
#include "predserve/model/prediction_cache.hpp"
#include "predserve/selection/policy.hpp"

namespace predserve::bench {

using namespace detail;

namespace {

// Warmup queries use items disjoint from measured ones so the cache stays cold.
constexpr std::uint64_t kWarmupItemBase = std::uint64_t{1} << 30;

std::string model_name(std::size_t j) { return "m" + std::to_string(j); }

frontend::RuntimeConfig ensemble_config(const std::string& app_name, std::size_t k, Duration slo,
                                        std::uint64_t seed) {
  frontend::RuntimeConfig c;
  c.service.seed = seed;
  AppConfig app;
  app.name = app_name;
  app.input_type = InputType::kInts;
  app.slo = slo;
  app.policy = {"exp4", false};
  app.default_output = Output("none");
  for (std::size_t j = 0; j < k; ++j) {
    frontend::ModelConfig m;
    m.name = model_name(j);
    m.input_type = InputType::kInts;
    c.models.push_back(m);
    app.candidate_models.push_back(m.name);
  }
  c.apps.push_back(app);
  return c;
}

}  // namespace

ExperimentReport run_stragglers(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"stragglers", seed, {}, {}, {}};
  const auto slo = param_ms(p, "slo_ms");
  const auto margin = param_ms(p, "combine_margin_ms");
  const auto slow = std::chrono::duration_cast<Duration>(slo * param(p, "slow_factor"));
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };

  Table table{"ensembles",
              {"size", "mode", "queries", "p50_ms", "p99_ms", "missing_fraction", "accuracy",
               "full_ensemble_accuracy"},
              {}};
  Table attempts{"attempts",
                 {"size", "attempt", "host_pauses", "max_pause_ms", "p99_ms", "accepted"},
                 {}};
  const auto max_size = static_cast<std::size_t>(param(p, "max_size"));
  for (std::size_t size = 2; size <= max_size; size *= 2) {
    for (const bool mitigation : {true, false}) {
      auto config = ensemble_config("ens", size, slo, seed);
      config.service.combine_margin = margin;
      auto& app = config.apps[0];
      app.straggler_mitigation = mitigation;
      app.blocking_timeout = param_ms(p, "blocking_timeout_ms");
      std::map<ModelName, SyntheticModelSpec> specs;
      for (std::size_t j = 0; j < size; ++j) {
        SyntheticModelSpec s;
        s.latency_fixed = param_ms(p, "fast_ms");
        s.error_rate = param(p, "error_rate");
        s.seed = seed * 1000 + j + 1;
        specs[model_name(j)] = s;
      }
      // The last member is the straggler; a fixed batch cap keeps it serving
      // the whole backlog in blocking mode.
      specs[model_name(size - 1)].latency_fixed = slow;
      config.models.back().batch_strategy = model::BatchStrategy::kFixed;
      config.models.back().max_batch_size = 64;

      WorkloadSpec w;
      w.arrival = Poisson{param(p, "rate")};
      w.duration = from_millis(param(p, mitigation ? "duration_s" : "blocking_duration_s") * 1000);
      const auto events = generate_workload(w, seed + size);

      // Deadline-mode windows that saw a host scheduling pause are measured
      // again; every attempt is reported.
      const auto attempts_allowed =
          mitigation ? static_cast<int>(param(p, "max_attempts")) : 1;
      std::vector<QueryRecord> records;
      for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
        LocalDeployment deployment(config, specs, Transport::kLoopback, seed);
        if (mitigation) {
          WorkloadSpec ws = w;
          ws.duration = from_millis(param(p, "warmup_s") * 1000);
          auto warm = generate_workload(ws, seed + size + 1);
          for (auto& e : warm) e.item += kWarmupItemBase;
          LoadDriver warmup(deployment.core().frontend(), "ens", warm, w.arrival, truth);
          warmup.start();
          warmup.wait();
        }
        PauseDetector detector(param_ms(p, "pause_threshold_ms"));
        LoadDriver driver(deployment.core().frontend(), "ens", events, w.arrival, truth);
        driver.start();
        driver.wait();
        detector.stop();
        records = driver.records();
        deployment.stop();
        if (!mitigation) break;
        std::vector<double> lat;
        for (const auto& r : records) lat.push_back(to_millis(r.latency));
        const bool clean = detector.pauses() == 0;
        attempts.add({std::to_string(size), std::to_string(attempt),
                      std::to_string(detector.pauses()),
                      fmt_double(to_millis(detector.max_lateness())),
                      fmt_double(percentile(lat, 99)), clean ? "1" : "0"});
        report.summary[fmt::format("size{}_attempts", size)] = attempt;
        if (clean) break;
      }

      // Reference answer with every member present, from the same combiner.
      const auto policy = selection::make_policy(app);
      const auto state = policy->init();
      std::uint64_t missing = 0, right = 0, full_right = 0;
      for (const auto& r : records) {
        missing += r.prediction.models_missing >= 1;
        right += correct(r, truth);
        OutputMap all;
        for (std::size_t j = 0; j < size; ++j) {
          all.emplace(model_name(j),
                      Output(synthetic_output(specs[model_name(j)], r.item, truth(r.item))));
        }
        const Query q("ens", "", labelled_input(r.item, truth(r.item)), Clock::now(), slo);
        full_right += policy->combine(state, q, app.candidate_models, all).output.value ==
                      std::to_string(truth(r.item));
      }
      const double n = std::max<double>(1, static_cast<double>(records.size()));
      const std::string mode = mitigation ? "deadline" : "blocking";
      const std::string prefix = fmt::format("size{}_{}_", size, mode);
      summarize_latency(report, prefix, records, slo);
      report.summary[prefix + "missing_fraction"] = static_cast<double>(missing) / n;
      report.summary[prefix + "accuracy"] = static_cast<double>(right) / n;
      report.summary[prefix + "full_accuracy"] = static_cast<double>(full_right) / n;
      table.add({std::to_string(size), mode, std::to_string(records.size()),
                 fmt_double(report.value(prefix + "p50_ms")),
                 fmt_double(report.value(prefix + "p99_ms")),
                 fmt_double(static_cast<double>(missing) / n),
                 fmt_double(static_cast<double>(right) / n),
                 fmt_double(static_cast<double>(full_right) / n)});
      report.tables.push_back(query_table(fmt::format("queries_size{}_{}", size, mode), records,
                                          truth, {}));
      if (!mitigation) continue;

      const double p99 = report.value(prefix + "p99_ms");
      report.check(fmt::format("size {} p99 within SLO + margin", size),
                   p99 <= to_millis(slo + margin),
                   fmt::format("p99 {:.2f} ms, bound {:.2f} ms", p99, to_millis(slo + margin)));
      const double frac = static_cast<double>(missing) / n;
      report.check(fmt::format("size {} straggler left out", size),
                   frac >= param(p, "min_missing_fraction"),
                   fmt::format("{:.3f} of queries missing a model, required >= {}", frac,
                               param(p, "min_missing_fraction")));
      if (size == max_size) {
        const double drop = (static_cast<double>(full_right) - static_cast<double>(right)) / n;
        report.summary["accuracy_drop"] = drop;
        report.check(fmt::format("size {} accuracy drop", size), drop <= param(p, "max_accuracy_drop"),
                     fmt::format("drop {:.4f}, allowed {}", drop, param(p, "max_accuracy_drop")));
      }
    }
  }
  report.tables.insert(report.tables.begin(), std::move(attempts));
  report.tables.insert(report.tables.begin(), std::move(table));
  return report;
}

ExperimentReport run_cache_zipf(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"cache-zipf", seed, {}, {}, {}};
  const auto capacity = static_cast<std::size_t>(param(p, "capacity"));
  WorkloadSpec w;
  w.arrival = ClosedLoop{1};
  w.query_count = static_cast<std::uint64_t>(param(p, "queries"));
  w.popularity = Zipf{param(p, "zipf_s"), static_cast<std::uint64_t>(param(p, "universe"))};
  const auto events = generate_workload(w, seed);

  // Sequential hit rate against the reference simulation.
  model::PredictionCache cache(capacity);
  ClockOracle oracle(capacity);
  const model::CacheWaiter ignore = [](const std::optional<Output>&) {};
  Table curve{"hit_rate", {"queries", "cache_hit_rate", "oracle_hit_rate"}, {}};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto input = labelled_input(events[i].item, 0);
    if (cache.lookup_or_subscribe("m", input, ignore) == model::LookupResult::kMissStarted) {
      cache.complete({"m", input}, Output("x"));
    }
    oracle.access(events[i].item);
    if ((i + 1) % 10000 == 0) {
      curve.add({std::to_string(i + 1),
                 fmt_double(static_cast<double>(cache.hits()) / static_cast<double>(cache.requests())),
                 fmt_double(oracle.hit_rate())});
    }
  }
  report.tables.push_back(std::move(curve));
  const double hit = static_cast<double>(cache.hits()) / static_cast<double>(cache.requests());
  report.summary["hit_rate"] = hit;
  report.summary["oracle_hit_rate"] = oracle.hit_rate();
  report.check("hit rate matches the CLOCK reference",
               std::abs(hit - oracle.hit_rate()) <= param(p, "hit_rate_tolerance"),
               fmt::format("cache {:.4f}, reference {:.4f}, tolerance {}", hit, oracle.hit_rate(),
                           param(p, "hit_rate_tolerance")));

  // Occupancy under concurrent access with overlapping evaluations.
  const auto threads = static_cast<std::size_t>(param(p, "threads"));
  model::PredictionCache shared(capacity);
  std::atomic<std::size_t> max_size{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      std::mt19937_64 rng(seed + t);
      ZipfSampler zipf(param(p, "zipf_s"), static_cast<std::uint64_t>(param(p, "universe")));
      std::vector<model::CacheKey> pending;
      for (std::size_t i = 0; i < events.size() / threads; ++i) {
        const auto input = labelled_input(zipf(rng), 0);
        if (shared.lookup_or_subscribe("m", input, ignore) == model::LookupResult::kMissStarted) {
          pending.push_back({"m", input});
        }
        if (pending.size() > 4 || (i % 7 == 0 && !pending.empty())) {
          shared.complete(pending.front(), Output("x"));
          pending.erase(pending.begin());
        }
        const auto s = shared.size();
        auto seen = max_size.load();
        while (s > seen && !max_size.compare_exchange_weak(seen, s)) {
        }
      }
      for (const auto& k : pending) shared.complete(k, Output("x"));
    });
  }
  for (auto& t : pool) t.join();
  report.summary["concurrent_max_size"] = static_cast<double>(max_size.load());
  report.summary["concurrent_requests"] = static_cast<double>(shared.requests());
  report.check("occupancy never exceeds capacity", max_size.load() <= capacity,
               fmt::format("max {} entries, capacity {}", max_size.load(), capacity));
  report.check("hit and miss counts add up", shared.hits() + shared.misses() == shared.requests(),
               fmt::format("{} hits + {} misses vs {} requests", shared.hits(), shared.misses(),
                           shared.requests()));

  // N concurrent misses on one key start one evaluation.
  model::PredictionCache coalesce(capacity);
  std::atomic<int> evaluations{0}, answered{0};
  coalesce.set_miss_handler([&](const model::CacheKey&, TimePoint) { ++evaluations; });
  std::barrier sync(static_cast<std::ptrdiff_t>(threads));
  pool.clear();
  const auto key_input = labelled_input(424242, 0);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      sync.arrive_and_wait();
      coalesce.lookup_or_subscribe("m", key_input,
                                   [&](const std::optional<Output>& o) { answered += o.has_value(); });
    });
  }
  for (auto& t : pool) t.join();
  coalesce.complete({"m", key_input}, Output("x"));
  report.summary["coalesced_evaluations"] = evaluations.load();
  report.summary["coalesced_answers"] = answered.load();
  report.check("concurrent misses coalesce",
               evaluations.load() == 1 && answered.load() == static_cast<int>(threads),
               fmt::format("{} evaluations, {} of {} waiters answered", evaluations.load(),
                           answered.load(), threads));
  return report;
}

ExperimentReport run_feedback_cache(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"feedback-cache", seed, {}, {}, {}};
  const auto k = static_cast<std::size_t>(param(p, "models"));
  const auto n = static_cast<std::uint64_t>(param(p, "items"));
  const auto slo = param_ms(p, "slo_ms");
  auto config = ensemble_config("fb", k, slo, seed);
  std::map<ModelName, SyntheticModelSpec> specs;
  for (std::size_t j = 0; j < k; ++j) {
    SyntheticModelSpec s;
    s.latency_fixed = param_ms(p, "fixed_ms");
    s.latency_per_item = param_ms(p, "per_item_ms");
    s.error_rate = 0.2;
    s.seed = seed * 1000 + j + 1;
    specs[model_name(j)] = s;
  }
  LocalDeployment deployment(config, specs, Transport::kLoopback, seed);
  auto& frontend = deployment.core().frontend();
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };

  // Prime the cache with predictions for the hot items.
  WorkloadSpec w;
  w.arrival = ClosedLoop{static_cast<std::uint32_t>(param(p, "concurrency"))};
  w.query_count = n;
  LoadDriver prime(frontend, "fb", generate_workload(w, seed), w.arrival, truth);
  prime.start();
  prime.wait();

  auto feedback_burst = [&](std::uint64_t first) {
    const auto start = Clock::now();
    std::uint64_t refused = 0;
    for (std::uint64_t i = first; i < first + n; ++i) {
      Feedback fb{"fb", "", labelled_input(i, truth(i)), Output(std::to_string(truth(i)))};
      while (true) {
        try {
          frontend.feedback(fb);
          break;
        } catch (const Unavailable&) {
          refused += 1;
          std::this_thread::sleep_for(milliseconds(1));
        }
      }
    }
    frontend.wait_for_feedback_idle(seconds(60));
    const double secs = to_millis(Clock::now() - start) / 1000.0;
    return std::make_pair(static_cast<double>(n) / secs, refused);
  };
  const auto evaluations_before = deployment.model("m0").items();
  const auto [hot, hot_refused] = feedback_burst(0);
  const auto hot_evaluations = deployment.model("m0").items() - evaluations_before;
  const auto [cold, cold_refused] = feedback_burst(n);
  const auto cold_evaluations = deployment.model("m0").items() - evaluations_before - hot_evaluations;
  deployment.stop();

  report.summary = {{"hot_feedback_per_s", hot},
                    {"cold_feedback_per_s", cold},
                    {"hot_to_cold_ratio", hot / std::max(cold, 1e-9)},
                    {"hot_evaluations", static_cast<double>(hot_evaluations)},
                    {"cold_evaluations", static_cast<double>(cold_evaluations)},
                    {"refused_retries", static_cast<double>(hot_refused + cold_refused)}};
  report.tables.push_back(Table{"feedback",
                                {"phase", "feedback_per_s", "evaluations"},
                                {{"hot", fmt_double(hot), std::to_string(hot_evaluations)},
                                 {"cold", fmt_double(cold), std::to_string(cold_evaluations)}}});
  report.check("hot-cache feedback outpaces cold-cache feedback", hot > cold,
               fmt::format("hot {:.0f}/s vs cold {:.0f}/s", hot, cold));
  return report;
}

ExperimentReport run_fault_injection(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"fault-injection", seed, {}, {}, {}};
  const auto k = static_cast<std::size_t>(param(p, "models"));
  const auto slo = param_ms(p, "slo_ms");
  auto config = ensemble_config("ft", k, slo, seed);
  config.service.combine_margin = param_ms(p, "combine_margin_ms");
  for (auto& m : config.models) m.replica_timeout = param_ms(p, "replica_timeout_ms");
  std::map<ModelName, SyntheticModelSpec> specs;
  for (std::size_t j = 0; j < k; ++j) {
    SyntheticModelSpec s;
    s.latency_fixed = param_ms(p, "fixed_ms");
    s.error_rate = 0.2;
    s.seed = seed * 1000 + j + 1;
    specs[model_name(j)] = s;
  }
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };
  WorkloadSpec w;
  w.arrival = Poisson{param(p, "rate")};
  w.duration = from_millis(param(p, "duration_s") * 1000);
  const auto events = generate_workload(w, seed);

  // Windows that saw a host scheduling pause are measured again; every
  // attempt is reported.
  Table attempts{"attempts", {"attempt", "host_pauses", "max_pause_ms", "late", "accepted"}, {}};
  Table faults{"faults", {"ts_ms", "model", "fault"}, {}};
  std::vector<QueryRecord> records;
  const auto attempts_allowed = static_cast<int>(param(p, "max_attempts"));
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    faults.rows.clear();
    LocalDeployment deployment(config, specs, Transport::kLoopback, seed);
    PauseDetector detector(param_ms(p, "pause_threshold_ms"));
    LoadDriver driver(deployment.core().frontend(), "ft", events, w.arrival, truth);
    std::atomic<bool> done{false};
    std::thread injector([&] {
      std::mt19937_64 rng(seed);
      const auto start = Clock::now();
      while (!done) {
        std::this_thread::sleep_for(param_ms(p, "fault_interval_ms"));
        if (done) break;
        const auto name = model_name(rng() % k);
        const char* kinds[] = {"kill", "flap", "stall"};
        const auto kind = kinds[rng() % 3];
        faults.add({fmt_double(to_millis(Clock::now() - start)), name, kind});
        if (std::string_view(kind) == "kill") {
          deployment.container(name).stop();
          std::this_thread::sleep_for(param_ms(p, "down_ms"));
          deployment.container(name).start();
        } else if (std::string_view(kind) == "flap") {
          deployment.container(name).drop_connection();
        } else {
          auto& model = deployment.model(name);
          model.set_latency_override(param_ms(p, "stall_ms"));
          std::this_thread::sleep_for(param_ms(p, "down_ms"));
          model.set_latency_override(Duration(-1));
        }
      }
    });
    driver.start();
    driver.wait();
    done = true;
    injector.join();
    detector.stop();
    records = driver.records();
    deployment.stop();
    const auto late = std::count_if(records.begin(), records.end(), [&](const QueryRecord& r) {
      return !r.completed || r.latency > slo;
    });
    const bool clean = detector.pauses() == 0;
    attempts.add({std::to_string(attempt), std::to_string(detector.pauses()),
                  fmt_double(to_millis(detector.max_lateness())), std::to_string(late),
                  clean ? "1" : "0"});
    report.summary["attempts"] = attempt;
    if (clean) break;
  }

  std::uint64_t late = 0, defaults = 0, missing = 0;
  for (const auto& r : records) {
    late += !r.completed || r.latency > slo;
    defaults += r.prediction.is_default;
    missing += r.prediction.models_missing > 0;
  }
  summarize_latency(report, "", records, slo);
  report.summary["faults"] = static_cast<double>(faults.rows.size());
  report.summary["late_answers"] = static_cast<double>(late);
  report.summary["default_answers"] = static_cast<double>(defaults);
  report.summary["answers_missing_models"] = static_cast<double>(missing);
  report.tables.push_back(std::move(attempts));
  report.tables.push_back(std::move(faults));
  report.tables.push_back(query_table("queries", records, truth, {}));
  report.check("every prediction answered by its deadline", late == 0 && !records.empty(),
               fmt::format("{} of {} answers late, max latency {:.2f} ms, SLO {:.0f} ms", late,
                           records.size(), report.value("max_ms"), to_millis(slo)));
  return report;
}

}  // namespace predserve::bench
