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

#include "predserve/selection/policy.hpp"

#include <map>
#include <mutex>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::selection {

BanditState BanditPolicy::init_state() const {
  return BanditState::uniform(app_.candidate_models, app_.eta);
}

FinalPrediction BanditPolicy::combine_typed(const BanditState& state, const Query&,
                                            const std::vector<ModelName>& selected,
                                            const OutputMap& available) const {
  return combine_at_deadline(state, app_, selected, available);
}

nlohmann::json BanditPolicy::describe_typed(const BanditState& state) const {
  nlohmann::json models = nlohmann::json::object();
  const auto p = state.probabilities();
  std::size_t i = 0;
  for (const auto& [name, m] : state.models) {
    models[name] = {{"weight", m.weight},
                    {"probability", p[i++]},
                    {"mean", m.mean},
                    {"count", m.count}};
  }
  return {{"policy", name()},
          {"eta", state.eta},
          {"query_count", state.query_count},
          {"models", models}};
}

std::vector<ModelName> Exp3Policy::select_typed(const BanditState& state, const Query&,
                                                Rng& rng) const {
  return {exp3_select(state, rng)};
}

BanditState Exp3Policy::observe_typed(BanditState state, const Query&, const Output& label,
                                      const OutputMap& preds, Rng& rng) const {
  const ModelName chosen = exp3_select(state, rng);
  auto it = preds.find(chosen);
  if (it == preds.end()) return state;
  exp3_observe(state, chosen, compute_loss(app_.loss, label, it->second), app_.weight_floor);
  if (it->second.parsed_scalar) state.record_scalar(chosen, *it->second.parsed_scalar);
  return state;
}

std::vector<ModelName> Exp4Policy::select_typed(const BanditState& state, const Query&,
                                                Rng&) const {
  std::vector<ModelName> all;
  for (const auto& [name, m] : state.models) all.push_back(name);
  return all;
}

BanditState Exp4Policy::observe_typed(BanditState state, const Query&, const Output& label,
                                      const OutputMap& preds, Rng&) const {
  if (preds.empty()) return state;
  exp4_observe(state, label, preds, app_.loss, app_.weight_floor);
  return state;
}

namespace {

std::mutex& registry_mu() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, PolicyFactory>& registry() {
  static std::map<std::string, PolicyFactory> r;
  return r;
}

}  // namespace

void register_policy(const std::string& name, PolicyFactory factory) {
  if (name.empty()) throw InvalidArgument("policy name must be nonempty");
  std::lock_guard lock(registry_mu());
  registry()[name] = std::move(factory);
}

bool has_policy(const std::string& name) {
  std::lock_guard lock(registry_mu());
  return registry().count(name) != 0;
}

std::unique_ptr<SelectionPolicy> make_policy(const AppConfig& app) {
  if (!app.policy.custom) {
    if (app.policy.name == "exp3") return std::make_unique<Exp3Policy>(app);
    if (app.policy.name == "exp4") return std::make_unique<Exp4Policy>(app);
    throw ConfigError(fmt::format("app '{}': unknown policy '{}'", app.name, app.policy.name));
  }
  PolicyFactory factory;
  {
    std::lock_guard lock(registry_mu());
    auto it = registry().find(app.policy.name);
    if (it == registry().end()) {
      throw ConfigError(
          fmt::format("app '{}': no custom policy registered as '{}'", app.name, app.policy.name));
    }
    factory = it->second;
  }
  return factory(app);
}

}  // namespace predserve::selection
