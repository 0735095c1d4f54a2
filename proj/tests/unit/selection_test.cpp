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

#include <cmath>
#include <filesystem>
#include <random>
#include <thread>
#include <cstring>
#include <unistd.h>

#include "doctest.h"
#include "predserve/core/errors.hpp"
#include "predserve/selection/bandit.hpp"
#include "predserve/selection/policy.hpp"
#include "predserve/selection/state_store.hpp"

using namespace predserve;
using namespace predserve::selection;

namespace {

BanditState weighted(std::vector<double> w, double eta = 0.1) {
  BanditState s;
  s.eta = eta;
  for (std::size_t i = 0; i < w.size(); ++i) s.models["m" + std::to_string(i + 1)].weight = w[i];
  return s;
}

AppConfig app_with(std::size_t k, OutputKind kind = OutputKind::kCategorical) {
  AppConfig app;
  app.name = "app";
  app.default_output = Output("default");
  app.output_kind = kind;
  for (std::size_t i = 0; i < k; ++i) app.candidate_models.push_back("m" + std::to_string(i + 1));
  return app;
}

}  // namespace

// ---------------------------------------------------------------------------
// Exp3

TEST_CASE("exp3_select is uniform on equal weights (chi-square)") {
  auto s = weighted({1, 1});
  Rng rng(1);
  constexpr int kDraws = 100000;
  int first = 0;
  for (int i = 0; i < kDraws; ++i) first += exp3_select(s, rng) == "m1";
  const double e = kDraws / 2.0;
  const double chi2 = std::pow(first - e, 2) / e + std::pow(kDraws - first - e, 2) / e;
  CHECK(chi2 < 10.83);  // 1 degree of freedom, p = 0.001
}

TEST_CASE("exp3_select follows the weights") {
  auto s = weighted({3, 1});
  Rng rng(2);
  constexpr int kDraws = 100000;
  int first = 0;
  for (int i = 0; i < kDraws; ++i) first += exp3_select(s, rng) == "m1";
  CHECK(std::abs(first / double(kDraws) - 0.75) <= 0.01);

  auto single = weighted({0.3});
  for (int i = 0; i < 100; ++i) CHECK(exp3_select(single, rng) == "m1");
}

TEST_CASE("exp3_observe examples") {
  auto s = weighted({1, 1});
  exp3_observe(s, "m1", 0.0);
  CHECK(s.probabilities() == std::vector<double>{0.5, 0.5});

  exp3_observe(s, "m1", 1.0);
  const double f = std::exp(-0.2);
  CHECK(s.probabilities()[0] == doctest::Approx(f / (f + 1)).epsilon(1e-12));
  CHECK(s.probabilities()[0] == doctest::Approx(0.4502).epsilon(1e-4));
  CHECK(s.probabilities()[1] == doctest::Approx(0.5498).epsilon(1e-4));
  CHECK(s.total_weight() == doctest::Approx(2.0).epsilon(1e-14));

  CHECK_THROWS_AS(exp3_observe(s, "nope", 0.5), InvalidArgument);
  auto clamped = weighted({1, 1});
  exp3_observe(clamped, "m1", 7.0);
  CHECK(clamped.probabilities()[0] == doctest::Approx(f / (f + 1)).epsilon(1e-12));
}

TEST_CASE("exp3 repeated losses drive the bad model down, matching a reference recurrence") {
  auto s = weighted({1, 1});
  // Reference: unnormalized log weights in long double.
  long double l1 = 0, l2 = 0;
  for (int round = 0; round < 100; ++round) {
    const long double p1 = 1.0L / (1.0L + std::exp(l2 - l1));
    l1 -= 0.1L * 1.0L / p1;
    exp3_observe(s, "m1", 1.0);
    exp3_observe(s, "m2", 0.0);
    const long double ref_p1 = 1.0L / (1.0L + std::exp(l2 - l1));
    REQUIRE(static_cast<long double>(s.probabilities()[0]) ==
            doctest::Approx(static_cast<double>(ref_p1)).epsilon(1e-9));
  }
  CHECK(s.probabilities()[0] < 0.05);
}

TEST_CASE("weights stay on the probability simplex") {
  Rng rng(3);
  std::uniform_real_distribution<double> loss(0, 1);
  auto s = weighted({1, 1, 1, 1, 1}, 0.5);
  for (int i = 0; i < 5000; ++i) {
    exp3_observe(s, exp3_select(s, rng), loss(rng), i % 2 ? 1e-6 : 0.0);
    const auto p = s.probabilities();
    double total = 0;
    for (double x : p) {
      REQUIRE(x > 0);
      total += x;
    }
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("weight floor keeps every model reachable") {
  auto s = weighted({1, 1});
  for (int i = 0; i < 2000; ++i) exp3_observe(s, "m1", 1.0, 1e-6);
  CHECK(s.models["m1"].weight >= 1e-6 * 0.999);
  auto unfloored = weighted({1, 1});
  for (int i = 0; i < 2000; ++i) exp3_observe(unfloored, "m1", 1.0);
  CHECK(unfloored.models["m1"].weight < 1e-6);
  CHECK(unfloored.models["m1"].weight > 0);
}

TEST_CASE("scaling all weights leaves probabilities and the vote unchanged") {
  auto s = weighted({0.5, 0.2, 0.3});
  auto scaled = s;
  for (auto& [n, m] : scaled.models) m.weight *= 1234.5;
  const auto p = s.probabilities();
  const auto q = scaled.probabilities();
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-15));
  OutputMap preds{{"m1", Output("a")}, {"m2", Output("b")}, {"m3", Output("b")}};
  CHECK(exp4_combine(s, preds, 3, OutputKind::kCategorical).output ==
        exp4_combine(scaled, preds, 3, OutputKind::kCategorical).output);
}

// ---------------------------------------------------------------------------
// Exp4

TEST_CASE("exp4_observe examples") {
  LossFn zero_one;
  auto s = weighted({1, 1});
  exp4_observe(s, Output("y"), {{"m1", Output("y")}, {"m2", Output("y")}}, zero_one);
  CHECK(s.probabilities() == std::vector<double>{0.5, 0.5});

  exp4_observe(s, Output("y"), {{"m1", Output("n")}, {"m2", Output("y")}}, zero_one);
  const double e = std::exp(-0.1);
  CHECK(s.probabilities()[0] == doctest::Approx(e / (e + 1)).epsilon(1e-12));
  CHECK(s.probabilities()[0] == doctest::Approx(0.4750).epsilon(1e-4));

  // Models without a prediction keep their weight before renormalization.
  auto t = weighted({1, 1, 1});
  exp4_observe(t, Output("y"), {{"m1", Output("n")}}, zero_one);
  CHECK(t.models["m2"].weight == doctest::Approx(t.models["m3"].weight));
}

TEST_CASE("exp4 trajectory with a degradation window matches a reference") {
  LossFn zero_one;
  BanditState s = weighted({1, 1, 1, 1, 1}, 0.1);
  std::vector<long double> logw(5, 0.0L);
  std::mt19937_64 rng(9);
  std::bernoulli_distribution err02(0.2);
  for (int t = 0; t < 20000; ++t) {
    OutputMap preds;
    std::vector<double> losses(5);
    const bool degraded = t >= 5000 && t < 10000;
    losses[0] = degraded ? 1.0 : (err02(rng) ? 1.0 : 0.0);
    for (int i = 1; i < 5; ++i) losses[i] = err02(rng) ? 1.0 : 0.0;
    for (int i = 0; i < 5; ++i) {
      preds["m" + std::to_string(i + 1)] = Output(losses[i] > 0 ? "wrong" : "right");
      logw[i] -= 0.1L * losses[i];
    }
    exp4_observe(s, Output("right"), preds, zero_one);
    if (t % 97 == 0 || t == 19999) {
      long double mx = *std::max_element(logw.begin(), logw.end());
      long double z = 0;
      for (auto l : logw) z += std::exp(l - mx);
      const auto p = s.probabilities();
      for (int i = 0; i < 5; ++i) {
        const long double ref = std::exp(logw[i] - mx) / z;
        REQUIRE(std::abs(p[i] - ref) / ref <= 1e-9);
      }
    }
  }
}

TEST_CASE("exp4_combine examples") {
  auto equal = weighted({1, 1, 1, 1, 1});
  OutputMap cats;
  for (int i = 1; i <= 5; ++i) cats["m" + std::to_string(i)] = Output("cat");
  auto all = exp4_combine(equal, cats, 5, OutputKind::kCategorical);
  CHECK(all.output == Output("cat"));
  CHECK(all.confidence == 1.0);

  cats["m5"] = Output("dog");
  auto four = exp4_combine(equal, cats, 5, OutputKind::kCategorical);
  CHECK(four.output == Output("cat"));
  CHECK(four.confidence == doctest::Approx(0.8));

  auto w = weighted({0.5, 0.2, 0.3});
  auto r = exp4_combine(w, {{"m1", Output("a")}, {"m2", Output("b")}, {"m3", Output("a")}}, 3,
                        OutputKind::kCategorical);
  CHECK(r.output == Output("a"));
  CHECK(r.confidence == doctest::Approx(2.0 / 3.0));

  auto tie = exp4_combine(weighted({1, 1}), {{"m1", Output("zeta")}, {"m2", Output("alpha")}}, 2,
                          OutputKind::kCategorical);
  CHECK(tie.output == Output("alpha"));
  CHECK(tie.confidence == 0.5);
}

TEST_CASE("exp4_combine weighted mean for scalar outputs") {
  auto w = weighted({3, 1});
  auto r = exp4_combine(w, {{"m1", Output("1")}, {"m2", Output("5")}}, 2, OutputKind::kScalar);
  CHECK(r.output.parsed_scalar == doctest::Approx(2.0));
  CHECK(r.output.value == "2");
  CHECK(r.confidence == 0.0);
  auto same = exp4_combine(w, {{"m1", Output("2")}, {"m2", Output("2.0000000001")}}, 2,
                           OutputKind::kScalar);
  CHECK(same.confidence == 1.0);
}

// ---------------------------------------------------------------------------
// Deadline combine

TEST_CASE("combine_at_deadline examples") {
  auto app = app_with(5);
  auto state = BanditState::uniform(app.candidate_models, 0.1);
  OutputMap preds;
  for (const auto& m : app.candidate_models) preds[m] = Output("cat");

  auto full = combine_at_deadline(state, app, app.candidate_models, preds);
  CHECK(full.confidence == 1.0);
  CHECK_FALSE(full.is_default);
  CHECK(full.models_used == 5);
  CHECK(full.models_missing == 0);

  preds.erase("m5");
  auto missing = combine_at_deadline(state, app, app.candidate_models, preds);
  CHECK(missing.output == Output("cat"));
  CHECK(missing.confidence == doctest::Approx(0.8));
  CHECK(missing.models_used == 4);
  CHECK(missing.models_missing == 1);

  app.confidence_threshold = 0.7;
  OutputMap split{{"m1", Output("cat")}, {"m2", Output("cat")}, {"m3", Output("cat")},
                  {"m4", Output("dog")}, {"m5", Output("dog")}};
  auto low = combine_at_deadline(state, app, app.candidate_models, split);
  CHECK(low.confidence == doctest::Approx(0.6));
  CHECK(low.is_default);
  CHECK(low.output == app.default_output);

  auto none = combine_at_deadline(state, app, app.candidate_models, {});
  CHECK(none.is_default);
  CHECK(none.confidence == 0.0);
  CHECK(none.output == app.default_output);
  CHECK(none.models_missing == 5);
}

TEST_CASE("combine_at_deadline substitutes running means for scalar models") {
  auto app = app_with(3, OutputKind::kScalar);
  auto state = BanditState::uniform(app.candidate_models, 0.1);
  state.record_scalar("m3", 1.0);
  state.record_scalar("m3", 3.0);
  OutputMap preds{{"m1", Output("2")}};
  auto fp = combine_at_deadline(state, app, app.candidate_models, preds);
  CHECK(fp.models_used == 1);
  CHECK(fp.models_missing == 2);
  CHECK(fp.output.parsed_scalar == doctest::Approx(2.0));
  // m1 and the substituted m3 agree; m2 has no history.
  CHECK(fp.confidence == doctest::Approx(2.0 / 3.0));

  auto categorical = app_with(3);
  auto fp2 = combine_at_deadline(state, categorical, categorical.candidate_models, preds);
  CHECK(fp2.confidence == doctest::Approx(1.0 / 3.0));
}

// ---------------------------------------------------------------------------
// Serialization

TEST_CASE("bandit state serializes to the documented layout") {
  BanditState s;
  s.eta = 0.5;
  s.query_count = 3;
  s.models["a"] = {2.0, -1.5, 7};
  const auto bytes = serialize(s);
  const std::vector<std::uint8_t> expected{
      1, 0, 0, 0,                             // version
      0, 0, 0, 0, 0, 0, 0xe0, 0x3f,           // eta 0.5
      3, 0, 0, 0, 0, 0, 0, 0,                 // query_count
      1, 0, 0, 0,                             // k
      1, 0, 0, 0, 'a',                        // name
      0, 0, 0, 0, 0, 0, 0, 0x40,              // weight 2.0
      0, 0, 0, 0, 0, 0, 0xf8, 0xbf,           // mean -1.5
      7, 0, 0, 0, 0, 0, 0, 0};                // count
  CHECK(bytes == expected);
  CHECK(deserialize_bandit(bytes) == s);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_bandit(truncated), InvalidArgument);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_bandit(trailing), InvalidArgument);
  auto bad_version = bytes;
  bad_version[0] = 9;
  CHECK_THROWS_AS(deserialize_bandit(bad_version), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Policies

namespace {

// Always picks the alphabetically first candidate; state is a call counter.
class FirstModelPolicy : public TypedPolicy<std::uint64_t> {
 public:
  explicit FirstModelPolicy(AppConfig app) : app_(std::move(app)) {}
  std::string name() const override { return "first"; }
  std::uint64_t init_state() const override { return 0; }
  std::vector<ModelName> select_typed(const std::uint64_t&, const Query&, Rng&) const override {
    return {app_.candidate_models.front()};
  }
  FinalPrediction combine_typed(const std::uint64_t&, const Query&,
                                const std::vector<ModelName>& selected,
                                const OutputMap& available) const override {
    FinalPrediction fp;
    fp.output = available.empty() ? app_.default_output : available.begin()->second;
    fp.confidence = available.empty() ? 0.0 : 1.0;
    fp.models_used = static_cast<std::uint32_t>(available.size());
    fp.models_missing = static_cast<std::uint32_t>(selected.size() - available.size());
    fp.is_default = available.empty();
    return fp;
  }
  std::uint64_t observe_typed(std::uint64_t n, const Query&, const Output&, const OutputMap&,
                              Rng&) const override {
    return n + 1;
  }
  nlohmann::json describe_typed(const std::uint64_t& n) const override { return {{"calls", n}}; }
  StateBlob encode(const std::uint64_t& n) const override {
    StateBlob b(8);
    std::memcpy(b.data(), &n, 8);
    return b;
  }
  std::uint64_t decode(std::span<const std::uint8_t> b) const override {
    std::uint64_t n = 0;
    std::memcpy(&n, b.data(), std::min<std::size_t>(8, b.size()));
    return n;
  }

 private:
  AppConfig app_;
};

Query query_for(const AppConfig& app) {
  return Query(app.name, "", InputPayload::from_string("x"), Clock::now(), app.slo);
}

}  // namespace

TEST_CASE("builtin policies through the type-erased interface") {
  auto app = app_with(3);
  app.policy.name = "exp4";
  auto exp4 = make_policy(app);
  Rng rng(4);
  auto state = exp4->init();
  const auto q = query_for(app);
  CHECK(exp4->select(state, q, rng).size() == 3);
  OutputMap preds{{"m1", Output("a")}, {"m2", Output("b")}, {"m3", Output("a")}};
  state = exp4->observe(state, q, Output("a"), preds, rng);
  CHECK(exp4->describe(state)["query_count"] == 1);
  CHECK(exp4->combine(state, q, {"m1", "m2", "m3"}, preds).output == Output("a"));

  app.policy.name = "exp3";
  auto exp3 = make_policy(app);
  auto s3 = exp3->init();
  CHECK(exp3->select(s3, q, rng).size() == 1);
  for (int i = 0; i < 50; ++i) s3 = exp3->observe(s3, q, Output("a"), preds, rng);
  const auto d = exp3->describe(s3);
  CHECK(d["models"]["m2"]["probability"].get<double>() < 1.0 / 3.0);

  app.policy.name = "bogus";
  CHECK_THROWS_AS(make_policy(app), ConfigError);
}

TEST_CASE("custom policies register by name") {
  auto app = app_with(2);
  app.policy = {"first-model", true};
  CHECK_THROWS_AS(make_policy(app), ConfigError);
  register_policy("first-model",
                  [](const AppConfig& a) { return std::make_unique<FirstModelPolicy>(a); });
  CHECK(has_policy("first-model"));
  auto policy = make_policy(app);
  Rng rng(0);
  auto state = policy->init();
  const auto q = query_for(app);
  CHECK(policy->select(state, q, rng) == std::vector<ModelName>{"m1"});
  state = policy->observe(state, q, Output("a"), {}, rng);
  CHECK(policy->describe(state)["calls"] == 1);
}

// ---------------------------------------------------------------------------
// Context state store

namespace {

Blob counter_blob(std::uint64_t n) {
  Blob b(8);
  std::memcpy(b.data(), &n, 8);
  return b;
}

std::uint64_t counter_of(const std::optional<Blob>& b) {
  std::uint64_t n = 0;
  if (b) std::memcpy(&n, b->data(), 8);
  return n;
}

}  // namespace

TEST_CASE("state store read-modify-write is atomic per key") {
  InMemoryStateStore store(16);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 1000; ++i) {
        store.update({"app", "ctx"}, [](const std::optional<Blob>& b) {
          return counter_blob(counter_of(b) + 1);
        });
        store.get({"app", "ctx"});
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(counter_of(store.get({"app", "ctx"})) == 8000);
}

TEST_CASE("state store evicts the least recently used context") {
  InMemoryStateStore store(2);
  auto set = [&](const std::string& ctx, std::uint64_t v) {
    store.update({"a", ctx}, [v](const std::optional<Blob>&) { return counter_blob(v); });
  };
  set("x", 1);
  set("y", 2);
  CHECK(store.get({"a", "x"}).has_value());
  set("z", 3);
  CHECK(store.size() == 2);
  CHECK(store.evictions() == 1);
  CHECK(store.get({"a", "x"}).has_value());
  CHECK_FALSE(store.get({"a", "y"}).has_value());
}

TEST_CASE("file store writes through and survives restarts") {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("predserve-state-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  {
    FileStateStore store(dir, 1);
    store.update({"app", "user/1"}, [](const std::optional<Blob>&) { return counter_blob(5); });
    store.update({"app", "user 2"}, [](const std::optional<Blob>&) { return counter_blob(6); });
    CHECK(store.size() == 1);
    CHECK(counter_of(store.get({"app", "user/1"})) == 5);
  }
  FileStateStore reopened(dir);
  CHECK(counter_of(reopened.get({"app", "user/1"})) == 5);
  CHECK(counter_of(reopened.get({"app", "user 2"})) == 6);
  CHECK_FALSE(reopened.get({"app", "nobody"}).has_value());
  std::filesystem::remove_all(dir);
}
