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

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "predserve/core/types.hpp"
#include "predserve/selection/bandit.hpp"

namespace predserve::selection {

using StateBlob = std::vector<std::uint8_t>;

// A model selection policy over an opaque, serialized per-context state.
// Implementations are stateless; every function is pure in its arguments.
class SelectionPolicy {
 public:
  virtual ~SelectionPolicy() = default;

  virtual std::string name() const = 0;
  virtual StateBlob init() const = 0;
  // A nonempty subset of the application's candidate models.
  virtual std::vector<ModelName> select(std::span<const std::uint8_t> state, const Query& query,
                                        Rng& rng) const = 0;
  // Invoked once per query with the predictions that arrived in time.
  virtual FinalPrediction combine(std::span<const std::uint8_t> state, const Query& query,
                                  const std::vector<ModelName>& selected,
                                  const OutputMap& available) const = 0;
  virtual StateBlob observe(std::span<const std::uint8_t> state, const Query& query,
                            const Output& label, const OutputMap& preds, Rng& rng) const = 0;
  // Human-readable view of a state blob.
  virtual nlohmann::json describe(std::span<const std::uint8_t> state) const = 0;
};

// Adapts a policy written against a concrete state type S; subclasses
// supply the codec through encode and decode.
template <typename S>
class TypedPolicy : public SelectionPolicy {
 public:
  virtual S init_state() const = 0;
  virtual std::vector<ModelName> select_typed(const S& state, const Query& query,
                                              Rng& rng) const = 0;
  virtual FinalPrediction combine_typed(const S& state, const Query& query,
                                        const std::vector<ModelName>& selected,
                                        const OutputMap& available) const = 0;
  virtual S observe_typed(S state, const Query& query, const Output& label,
                          const OutputMap& preds, Rng& rng) const = 0;
  virtual nlohmann::json describe_typed(const S& state) const = 0;

  virtual StateBlob encode(const S& state) const = 0;
  virtual S decode(std::span<const std::uint8_t> blob) const = 0;

  StateBlob init() const final { return encode(init_state()); }
  std::vector<ModelName> select(std::span<const std::uint8_t> state, const Query& query,
                                Rng& rng) const final {
    return select_typed(decode(state), query, rng);
  }
  FinalPrediction combine(std::span<const std::uint8_t> state, const Query& query,
                          const std::vector<ModelName>& selected,
                          const OutputMap& available) const final {
    return combine_typed(decode(state), query, selected, available);
  }
  StateBlob observe(std::span<const std::uint8_t> state, const Query& query,
                    const Output& label, const OutputMap& preds, Rng& rng) const final {
    return encode(observe_typed(decode(state), query, label, preds, rng));
  }
  nlohmann::json describe(std::span<const std::uint8_t> state) const final {
    return describe_typed(decode(state));
  }
};

// Shared plumbing for the exponential-weights policies.
class BanditPolicy : public TypedPolicy<BanditState> {
 public:
  explicit BanditPolicy(AppConfig app) : app_(std::move(app)) {}

  BanditState init_state() const override;
  FinalPrediction combine_typed(const BanditState& state, const Query& query,
                                const std::vector<ModelName>& selected,
                                const OutputMap& available) const override;
  nlohmann::json describe_typed(const BanditState& state) const override;
  StateBlob encode(const BanditState& state) const override { return serialize(state); }
  BanditState decode(std::span<const std::uint8_t> blob) const override {
    return deserialize_bandit(blob);
  }

  const AppConfig& app() const noexcept { return app_; }

 protected:
  AppConfig app_;
};

// Selects one model per query. Feedback updates one model drawn from the
// current distribution, the bandit feedback model.
class Exp3Policy : public BanditPolicy {
 public:
  using BanditPolicy::BanditPolicy;
  std::string name() const override { return "exp3"; }
  std::vector<ModelName> select_typed(const BanditState& state, const Query& query,
                                      Rng& rng) const override;
  BanditState observe_typed(BanditState state, const Query& query, const Output& label,
                            const OutputMap& preds, Rng& rng) const override;
};

// Evaluates every candidate and combines by weight.
class Exp4Policy : public BanditPolicy {
 public:
  using BanditPolicy::BanditPolicy;
  std::string name() const override { return "exp4"; }
  std::vector<ModelName> select_typed(const BanditState& state, const Query& query,
                                      Rng& rng) const override;
  BanditState observe_typed(BanditState state, const Query& query, const Output& label,
                            const OutputMap& preds, Rng& rng) const override;
};

using PolicyFactory = std::function<std::unique_ptr<SelectionPolicy>(const AppConfig&)>;

// Custom policies registered by name. Registration is expected at startup.
void register_policy(const std::string& name, PolicyFactory factory);
bool has_policy(const std::string& name);

// Builds the policy named by app.policy. Throws ConfigError for an unknown
// custom name.
std::unique_ptr<SelectionPolicy> make_policy(const AppConfig& app);

}  // namespace predserve::selection
