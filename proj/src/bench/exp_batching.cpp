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
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "common.hpp"
#include "predserve/bench/simulator.hpp"
#include "predserve/bench/workload.hpp"

namespace predserve::bench {

using namespace detail;

namespace {

std::vector<Duration> offsets(const std::vector<QueryEvent>& events) {
  std::vector<Duration> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.offset);
  return out;
}

std::function<Duration(std::uint32_t)> linear_latency(Duration fixed, Duration per_item) {
  return [fixed, per_item](std::uint32_t n) { return fixed + per_item * static_cast<std::int64_t>(n); };
}

frontend::RuntimeConfig single_model(const Params& p, model::BatchStrategy strategy,
                                     std::uint32_t max_batch, Duration delay, std::uint64_t seed) {
  frontend::RuntimeConfig c;
  c.service.seed = seed;
  AppConfig app;
  app.name = "bench";
  app.input_type = InputType::kInts;
  app.slo = param_ms(p, "slo_ms");
  app.candidate_models = {"m"};
  c.apps.push_back(app);
  frontend::ModelConfig m;
  m.name = "m";
  m.input_type = InputType::kInts;
  m.batch_strategy = strategy;
  m.max_batch_size = max_batch;
  m.batch_delay = delay;
  c.models.push_back(m);
  return c;
}

SyntheticModelSpec linear_model(const Params& p) {
  SyntheticModelSpec s;
  s.latency_fixed = param_ms(p, "fixed_ms");
  s.latency_per_item = param_ms(p, "per_item_ms");
  return s;
}

struct ThroughputRun {
  double evaluations_per_s = 0;
  double harness_qps = 0;
  double server_qps = 0;
  double goodput = 0;
  double mean_batch = 0;
  double busy_per_item_ms = 0;
  std::vector<QueryRecord> records;
  std::uint64_t max_in_flight = 0;
};

// Runs the stream against a fresh loopback deployment. The measurement
// window starts after warmup and ends after measure or when the stream is
// exhausted.
ThroughputRun measure_throughput(const frontend::RuntimeConfig& config, const Params& p,
                                 const std::vector<QueryEvent>& events, const Arrival& arrival,
                                 Duration warmup, Duration measure, std::uint64_t seed) {
  LocalDeployment deployment(config, {{"m", linear_model(p)}}, Transport::kLoopback, seed);
  auto& model = deployment.model("m");
  model.track_batch_sizes(events.size());
  auto& predictions = deployment.core().metrics().counter("predictions_total");
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };
  LoadDriver driver(deployment.core().frontend(), "bench", events, arrival, truth);

  struct Snapshot {
    TimePoint at;
    std::uint64_t items, batches, completed, predictions;
    Duration busy;
  };
  auto snap = [&] {
    return Snapshot{Clock::now(), model.items(), model.batches(), driver.completed(),
                    predictions.value(), model.busy()};
  };
  driver.start();
  std::this_thread::sleep_for(warmup);
  const auto a = snap();
  const auto window_start = a.at;
  const auto stop_at = a.at + measure;
  while (Clock::now() < stop_at && driver.completed() < events.size()) {
    std::this_thread::sleep_for(milliseconds(5));
  }
  const auto b = snap();
  driver.stop();

  ThroughputRun run;
  const double secs = to_millis(b.at - a.at) / 1000.0;
  run.evaluations_per_s = static_cast<double>(b.items - a.items) / secs;
  run.harness_qps = static_cast<double>(b.completed - a.completed) / secs;
  run.server_qps = static_cast<double>(b.predictions - a.predictions) / secs;
  run.mean_batch = b.batches > a.batches ? static_cast<double>(b.items - a.items) /
                                               static_cast<double>(b.batches - a.batches)
                                         : 0;
  run.busy_per_item_ms =
      b.items > a.items ? to_millis(b.busy - a.busy) / static_cast<double>(b.items - a.items) : 0;
  run.records = driver.records();
  run.max_in_flight = driver.max_in_flight();
  std::uint64_t good = 0;
  const auto start_offset = window_start - driver.started_at();
  for (const auto& r : run.records) {
    const auto done = r.issued + r.latency;
    if (r.completed && !r.prediction.is_default && done >= start_offset &&
        done < start_offset + (b.at - a.at)) {
      good += 1;
    }
  }
  run.goodput = static_cast<double>(good) / secs;
  deployment.stop();
  return run;
}

}  // namespace

ExperimentReport run_aimd_convergence(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"aimd-convergence", seed, {}, {}, {}};
  WorkloadSpec w;
  w.arrival = Poisson{param(p, "rate")};
  w.duration = from_millis(param(p, "duration_s") * 1000);
  const auto events = generate_workload(w, seed);

  SimOptions o;
  o.batching.strategy = model::BatchStrategy::kAimd;
  o.batching.additive_step = static_cast<std::uint32_t>(param(p, "additive_step"));
  o.batch_slo = param_ms(p, "slo_ms");
  o.query_slo = param_ms(p, "slo_ms");
  o.latency = linear_latency(param_ms(p, "fixed_ms"), param_ms(p, "per_item_ms"));
  const auto sim = simulate_replica(offsets(events), o);

  Table batches{"batches", {"start_ms", "size", "latency_ms", "max_batch"}, {}};
  const Duration steady_from = *w.duration / 2;
  std::uint32_t lo = std::numeric_limits<std::uint32_t>::max(), hi = 0;
  double sum = 0;
  std::size_t steady = 0, within = 0;
  for (const auto& b : sim.batches) {
    batches.add({fmt_double(to_millis(b.start)), std::to_string(b.size),
                 fmt_double(to_millis(b.latency)), std::to_string(b.max_batch)});
    if (b.latency <= o.batch_slo) within += 1;
    if (b.start >= steady_from) {
      lo = std::min(lo, b.max_batch);
      hi = std::max(hi, b.max_batch);
      sum += b.max_batch;
      steady += 1;
    }
  }
  Table queries{"queries", {"ts_ms", "latency_ms", "batch_size", "served"}, {}};
  std::vector<double> lat;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& l = sim.query_latency[i];
    if (l) lat.push_back(to_millis(*l));
    queries.add({fmt_double(to_millis(events[i].offset)), l ? fmt_double(to_millis(*l)) : "",
                 std::to_string(sim.query_batch_size[i]), l ? "1" : "0"});
  }
  report.tables = {std::move(batches), std::move(queries)};

  const double within_fraction = sim.batches.empty() ? 0 : static_cast<double>(within) / sim.batches.size();
  report.summary = {{"queries", static_cast<double>(events.size())},
                    {"served", static_cast<double>(sim.served)},
                    {"expired", static_cast<double>(sim.expired)},
                    {"batches", static_cast<double>(sim.batches.size())},
                    {"steady_max_batch_min", static_cast<double>(lo)},
                    {"steady_max_batch_max", static_cast<double>(hi)},
                    {"steady_max_batch_mean", steady ? sum / steady : 0},
                    {"batches_within_slo_fraction", within_fraction},
                    {"throughput_qps", sim.throughput()},
                    {"p99_ms", percentile(lat, 99)}};
  const double lo_bound = param(p, "steady_min"), hi_bound = param(p, "steady_max");
  report.check("steady-state max_batch range",
               steady > 0 && lo >= lo_bound && hi <= hi_bound,
               fmt::format("observed [{}, {}], required within [{}, {}]", lo, hi, lo_bound, hi_bound));
  report.check("batches within SLO", within_fraction >= param(p, "min_within_slo"),
               fmt::format("{:.4f} of {} batches, required >= {}", within_fraction,
                           sim.batches.size(), param(p, "min_within_slo")));
  return report;
}

ExperimentReport run_batching_comparison(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"batching-comparison", seed, {}, {}, {}};
  const auto concurrency = static_cast<std::uint32_t>(param(p, "concurrency"));
  const auto warmup = from_millis(param(p, "warmup_s") * 1000);
  const auto measure = from_millis(param(p, "measure_s") * 1000);
  const auto slo = param_ms(p, "slo_ms");
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };

  struct Variant {
    std::string name;
    model::BatchStrategy strategy;
    std::uint32_t max_batch;
    Duration warmup;
  };
  const std::vector<Variant> variants{
      {"none", model::BatchStrategy::kFixed, 1, from_millis(param(p, "baseline_warmup_s") * 1000)},
      {"aimd", model::BatchStrategy::kAimd, model::kMaxBatchCap, warmup},
      {"quantile", model::BatchStrategy::kQuantile, model::kMaxBatchCap, warmup}};

  Table summary{"strategies",
                {"strategy", "evaluations_per_s", "goodput_qps", "harness_qps", "server_qps",
                 "mean_batch", "p50_ms", "p99_ms"},
                {}};
  std::map<std::string, double> tput;
  for (const auto& v : variants) {
    WorkloadSpec w;
    w.arrival = ClosedLoop{concurrency};
    const double budget_s = to_millis(v.warmup + measure) / 1000.0;
    w.query_count = static_cast<std::uint64_t>(budget_s * param(p, "max_qps"));
    const auto events = generate_workload(w, seed);
    const auto run = measure_throughput(single_model(p, v.strategy, v.max_batch, Duration{0}, seed),
                                        p, events, w.arrival, v.warmup, measure, seed);
    tput[v.name] = run.evaluations_per_s;
    summarize_latency(report, v.name + "_", run.records, slo);
    report.summary[v.name + "_evaluations_per_s"] = run.evaluations_per_s;
    report.summary[v.name + "_goodput_qps"] = run.goodput;
    report.summary[v.name + "_harness_qps"] = run.harness_qps;
    report.summary[v.name + "_server_qps"] = run.server_qps;
    report.summary[v.name + "_mean_batch"] = run.mean_batch;
    summary.add({v.name, fmt_double(run.evaluations_per_s), fmt_double(run.goodput),
                 fmt_double(run.harness_qps), fmt_double(run.server_qps),
                 fmt_double(run.mean_batch), fmt_double(report.value(v.name + "_p50_ms")),
                 fmt_double(report.value(v.name + "_p99_ms"))});
    report.tables.push_back(query_table("queries_" + v.name, run.records, truth, {}));
    const double gap = std::abs(run.harness_qps - run.server_qps) /
                       std::max(run.server_qps, 1e-9);
    report.check(v.name + " harness vs server counters", gap <= 0.01,
                 fmt::format("harness {:.1f} qps, server {:.1f} qps", run.harness_qps,
                             run.server_qps));
  }
  report.tables.insert(report.tables.begin(), std::move(summary));

  const double min_speedup = param(p, "min_speedup");
  for (const auto* s : {"aimd", "quantile"}) {
    const double speedup = tput[s] / std::max(tput["none"], 1e-9);
    report.summary[std::string(s) + "_speedup"] = speedup;
    report.check(std::string(s) + " speedup over no batching", speedup >= min_speedup,
                 fmt::format("{:.1f}x ({:.0f} vs {:.0f} evaluations/s), required >= {}x", speedup,
                             tput[s], tput["none"], min_speedup));
  }
  const double gap = std::abs(tput["aimd"] - tput["quantile"]) / std::max(tput["aimd"], tput["quantile"]);
  report.summary["adaptive_gap"] = gap;
  report.check("aimd and quantile agree", gap <= param(p, "max_gap"),
               fmt::format("relative gap {:.3f}, required <= {}", gap, param(p, "max_gap")));
  return report;
}

ExperimentReport run_batch_delay(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"batch-delay", seed, {}, {}, {}};
  WorkloadSpec w;
  w.arrival = Poisson{param(p, "rate")};
  w.duration = from_millis(param(p, "duration_s") * 1000);
  const auto events = generate_workload(w, seed);
  const auto slo = param_ms(p, "slo_ms");
  const TruthFn truth = [seed](std::uint64_t i) { return binary_truth(seed, i); };
  const std::vector<std::pair<std::string, Duration>> delays{{"delay0", Duration{0}},
                                                             {"delay", param_ms(p, "delay_ms")}};

  Table summary{"delays",
                {"variant", "delay_ms", "goodput_qps", "evaluations_per_s", "mean_batch",
                 "busy_per_item_ms", "sim_throughput_qps", "sim_mean_batch", "p99_ms"},
                {}};
  std::map<std::string, double> goodput, sim_tput, per_item;
  for (const auto& [name, delay] : delays) {
    const auto config = single_model(p, model::BatchStrategy::kAimd, model::kMaxBatchCap, delay, seed);
    // The whole stream is measured: no warmup, window = stream duration.
    const auto run = measure_throughput(config, p, events, w.arrival, Duration{0},
                                        *w.duration + seconds(1), seed);
    std::uint64_t good = 0;
    for (const auto& r : run.records) good += r.completed && !r.prediction.is_default;
    goodput[name] = static_cast<double>(good) / (to_millis(*w.duration) / 1000.0);
    per_item[name] = run.busy_per_item_ms;

    SimOptions o;
    o.batch_slo = std::chrono::duration_cast<Duration>(slo * frontend::kBatchSloFraction);
    o.query_slo = slo;
    o.batch_delay = delay;
    o.latency = linear_latency(param_ms(p, "fixed_ms"), param_ms(p, "per_item_ms"));
    const auto sim = simulate_replica(offsets(events), o);
    sim_tput[name] = sim.throughput();
    const double sim_batch =
        sim.batches.empty() ? 0 : static_cast<double>(sim.served) / sim.batches.size();

    summarize_latency(report, name + "_", run.records, slo);
    report.summary[name + "_goodput_qps"] = goodput[name];
    report.summary[name + "_mean_batch"] = run.mean_batch;
    report.summary[name + "_busy_per_item_ms"] = run.busy_per_item_ms;
    report.summary[name + "_sim_throughput_qps"] = sim.throughput();
    report.summary[name + "_sim_mean_batch"] = sim_batch;
    summary.add({name, fmt_double(to_millis(delay)), fmt_double(goodput[name]),
                 fmt_double(run.evaluations_per_s), fmt_double(run.mean_batch),
                 fmt_double(run.busy_per_item_ms), fmt_double(sim.throughput()),
                 fmt_double(sim_batch), fmt_double(report.value(name + "_p99_ms"))});
    report.tables.push_back(query_table("queries_" + name, run.records, truth, {}));
  }
  report.tables.insert(report.tables.begin(), std::move(summary));

  const double ratio = goodput["delay"] / std::max(goodput["delay0"], 1e-9);
  const double sim_ratio = sim_tput["delay"] / std::max(sim_tput["delay0"], 1e-9);
  report.summary["throughput_ratio"] = ratio;
  report.summary["sim_throughput_ratio"] = sim_ratio;
  report.summary["efficiency_ratio"] = per_item["delay0"] / std::max(per_item["delay"], 1e-9);
  report.check("delayed batching throughput gain", ratio >= param(p, "min_ratio"),
               fmt::format("measured {:.3f}x, simulation oracle {:.3f}x, required >= {}x", ratio,
                           sim_ratio, param(p, "min_ratio")));
  return report;
}

}  // namespace predserve::bench
