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
#include <limits>

#include <fmt/format.h>

#include "common.hpp"
#include "predserve/selection/policy.hpp"

namespace predserve::bench {

using namespace detail;

namespace {

struct PolicyTrace {
  std::vector<bool> wrong;
  std::vector<double> confidence;
};

// Serves n queries with the policy and feeds back the true label after
// each, every model answering in time. Deterministic in seed.
PolicyTrace simulate_policy(const AppConfig& app, const std::vector<SyntheticModelSpec>& models,
                            std::uint64_t n, std::uint64_t seed) {
  const auto policy = selection::make_policy(app);
  auto state = policy->init();
  selection::Rng rng(seed);
  PolicyTrace trace;
  trace.wrong.reserve(n);
  trace.confidence.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto truth = binary_truth(seed, i);
    const Output label(std::to_string(truth));
    OutputMap outputs;
    for (std::size_t j = 0; j < models.size(); ++j) {
      outputs.emplace(app.candidate_models[j], Output(synthetic_output(models[j], i, truth)));
    }
    const Query q(app.name, "", labelled_input(i, truth), Clock::now(), app.slo);
    const auto selected = policy->select(state, q, rng);
    OutputMap available;
    for (const auto& m : selected) available.emplace(m, outputs.at(m));
    const auto answer = policy->combine(state, q, selected, available);
    trace.wrong.push_back(answer.output.value != label.value);
    trace.confidence.push_back(answer.confidence);
    state = policy->observe(state, q, label, outputs, rng);
  }
  return trace;
}

double error_rate(const std::vector<bool>& wrong, std::uint64_t begin, std::uint64_t end) {
  end = std::min<std::uint64_t>(end, wrong.size());
  if (end <= begin) return 0;
  return static_cast<double>(std::count(wrong.begin() + begin, wrong.begin() + end, true)) /
         static_cast<double>(end - begin);
}

AppConfig bandit_app(const std::string& policy, double eta, double floor, std::size_t k) {
  AppConfig app;
  app.name = policy;
  app.input_type = InputType::kInts;
  app.policy = {policy, false};
  app.eta = eta;
  app.weight_floor = floor;
  app.default_output = Output("none");
  for (std::size_t j = 0; j < k; ++j) app.candidate_models.push_back("m" + std::to_string(j));
  return app;
}

}  // namespace

ExperimentReport run_model_failure(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"model-failure", seed, {}, {}, {}};
  const auto n = static_cast<std::uint64_t>(param(p, "queries"));
  const auto begin = static_cast<std::uint64_t>(param(p, "degrade_begin"));
  const auto end = static_cast<std::uint64_t>(param(p, "degrade_end"));
  const std::vector<double> rates{0.5, 0.4, 0.3, 0.2, 0.1};

  std::vector<SyntheticModelSpec> models;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    SyntheticModelSpec s;
    s.error_rate = rates[j];
    s.seed = seed * 1000 + j + 1;
    models.push_back(s);
  }
  // The best model fails during the window.
  models.back().error_schedule = {{begin, end, param(p, "degraded_rate")}};

  std::map<std::string, std::vector<bool>> wrong;
  for (std::size_t j = 0; j < models.size(); ++j) {
    auto& w = wrong["m" + std::to_string(j)];
    for (std::uint64_t i = 0; i < n; ++i) {
      w.push_back(synthetic_errs(models[j], i));
    }
  }
  for (const auto* policy : {"exp3", "exp4"}) {
    wrong[policy] = simulate_policy(bandit_app(policy, param(p, "eta"), param(p, "weight_floor"),
                                               models.size()),
                                    models, n, seed)
                        .wrong;
  }

  Table curves{"cumulative_error", {"queries"}, {}};
  for (const auto& [name, w] : wrong) curves.header.push_back(name);
  const auto stride = static_cast<std::uint64_t>(param(p, "curve_stride"));
  for (std::uint64_t i = stride; i <= n; i += stride) {
    std::vector<std::string> row{std::to_string(i)};
    for (const auto& [name, w] : wrong) row.push_back(fmt_double(error_rate(w, 0, i)));
    curves.add(std::move(row));
  }
  report.tables.push_back(std::move(curves));

  double best_static = std::numeric_limits<double>::infinity();
  double best_pre = std::numeric_limits<double>::infinity();
  for (const auto& [name, w] : wrong) {
    report.summary[name + "_final_error"] = error_rate(w, 0, n);
    report.summary[name + "_pre_window_error"] = error_rate(w, 0, begin);
    report.summary[name + "_window_error"] = error_rate(w, begin, end);
    if (name[0] == 'm') {
      best_static = std::min(best_static, error_rate(w, 0, n));
      best_pre = std::min(best_pre, error_rate(w, 0, begin));
    }
  }
  report.summary["best_static_final_error"] = best_static;
  report.summary["best_static_pre_window_error"] = best_pre;
  const double tol = param(p, "pre_window_tolerance");
  for (const std::string policy : {"exp3", "exp4"}) {
    const double final = error_rate(wrong[policy], 0, n);
    const double pre = error_rate(wrong[policy], 0, begin);
    report.check(policy + " beats every static model", final < best_static,
                 fmt::format("final error {:.4f} vs best static {:.4f}", final, best_static));
    report.check(policy + " tracks the best model before the failure",
                 std::abs(pre - best_pre) <= tol,
                 fmt::format("error {:.4f} vs best model {:.4f} over the first {} queries, "
                             "tolerance {}",
                             pre, best_pre, begin, tol));
  }
  return report;
}

ExperimentReport run_ensemble_confidence(std::uint64_t seed, const Params& p) {
  ExperimentReport report{"ensemble-confidence", seed, {}, {}, {}};
  const auto n = static_cast<std::uint64_t>(param(p, "queries"));
  const auto k = static_cast<std::size_t>(param(p, "models"));
  const double rate = param(p, "error_rate");
  std::vector<SyntheticModelSpec> models;
  for (std::size_t j = 0; j < k; ++j) {
    SyntheticModelSpec s;
    s.error_rate = rate;
    s.seed = seed * 1000 + j + 1;
    models.push_back(s);
  }
  const auto trace =
      simulate_policy(bandit_app("exp4", param(p, "eta"), param(p, "weight_floor"), k), models, n, seed);

  std::map<double, std::pair<std::uint64_t, std::uint64_t>> buckets;  // confidence -> (n, wrong)
  std::uint64_t unanimous = 0, unanimous_wrong = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    auto& b = buckets[trace.confidence[i]];
    b.first += 1;
    b.second += trace.wrong[i];
    if (trace.confidence[i] >= 1.0) {
      unanimous += 1;
      unanimous_wrong += trace.wrong[i];
    }
  }
  Table table{"confidence", {"confidence", "queries", "error"}, {}};
  for (const auto& [c, b] : buckets) {
    table.add({fmt_double(c), std::to_string(b.first),
               fmt_double(static_cast<double>(b.second) / static_cast<double>(b.first))});
  }
  report.tables.push_back(std::move(table));

  double single = 0;
  for (const auto& m : models) {
    std::uint64_t e = 0;
    for (std::uint64_t i = 0; i < n; ++i) e += synthetic_errs(m, i);
    single += static_cast<double>(e) / static_cast<double>(n);
  }
  single /= static_cast<double>(k);
  const double overall = error_rate(trace.wrong, 0, n);
  const double unanimous_error =
      unanimous ? static_cast<double>(unanimous_wrong) / static_cast<double>(unanimous) : 1.0;
  report.summary = {{"ensemble_error", overall},
                    {"mean_single_model_error", single},
                    {"unanimous_queries", static_cast<double>(unanimous)},
                    {"unanimous_error", unanimous_error}};
  const double bound = rate - param(p, "min_margin");
  report.check("ensemble beats single models", overall < bound,
               fmt::format("ensemble error {:.4f}, required < {:.4f}", overall, bound));
  report.check("unanimous queries are more accurate", unanimous > 0 && unanimous_error < overall,
               fmt::format("unanimous error {:.4f} over {} queries vs overall {:.4f}",
                           unanimous_error, unanimous, overall));
  return report;
}

}  // namespace predserve::bench
