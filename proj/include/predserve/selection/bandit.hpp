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
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "predserve/core/types.hpp"

namespace predserve::selection {

using Rng = std::mt19937_64;

struct ModelStats {
  double weight = 1.0;  // s_i
  double mean = 0.0;    // running mean of parsed scalar outputs
  std::uint64_t count = 0;

  friend bool operator==(const ModelStats&, const ModelStats&) = default;
};

// Exponential-weights state for one (application, context). Models are kept
// in name order; probability vectors follow that order.
struct BanditState {
  static constexpr std::uint32_t kVersion = 1;

  double eta = 0.1;
  std::uint64_t query_count = 0;
  std::map<ModelName, ModelStats> models;

  static BanditState uniform(const std::vector<ModelName>& models, double eta);

  std::size_t k() const noexcept { return models.size(); }
  double total_weight() const noexcept;
  std::vector<double> probabilities() const;
  double probability(const ModelName& model) const;

  // Rescales so the weights sum to k, then raises weights below floor and
  // rescales again. A zero floor only rescales.
  void renormalize(double floor);
  // Welford update of the model's running mean.
  void record_scalar(const ModelName& model, double x);

  friend bool operator==(const BanditState&, const BanditState&) = default;
};

// Versioned flat binary:
//   version:u32 eta:f64 query_count:u64 k:u32
//   k x { name_len:u32 name weight:f64 mean:f64 count:u64 }
std::vector<std::uint8_t> serialize(const BanditState& state);
// Throws InvalidArgument on malformed input.
BanditState deserialize_bandit(std::span<const std::uint8_t> bytes);

// Draws model i with probability s_i / sum_j s_j.
const ModelName& exp3_select(const BanditState& state, Rng& rng);

// s_chosen <- s_chosen * exp(-eta * loss / p_chosen), p from the pre-update
// weights, then renormalize. Loss outside [0,1] is clamped.
void exp3_observe(BanditState& state, const ModelName& chosen, double loss,
                  double weight_floor = 0.0);

// s_i <- s_i * exp(-eta * L(label, pred_i)) for each model with a prediction,
// then renormalize. Scalar predictions feed the running means.
void exp4_observe(BanditState& state, const Output& label, const OutputMap& preds,
                  const LossFn& loss, double weight_floor = 0.0);

struct Combined {
  Output output;
  double confidence = 0.0;
  std::uint32_t agreeing = 0;
};

// Weighted vote (categorical) or weighted mean (scalar) over the available
// predictions. Confidence is agreeing / selected_count. available must be
// nonempty and its models must be in the state.
Combined exp4_combine(const BanditState& state, const OutputMap& available,
                      std::size_t selected_count, OutputKind kind,
                      double agreement_tolerance = 1e-6);

// Scalar agreement: |pred - final| <= tolerance * max(1, |final|).
bool agrees(const Output& pred, const Output& final_output, OutputKind kind,
            double agreement_tolerance);

// Final answer for a query from whatever predictions arrived. Missing scalar
// models with history are substituted by their running mean.
FinalPrediction combine_at_deadline(const BanditState& state, const AppConfig& app,
                                    const std::vector<ModelName>& selected,
                                    const OutputMap& available);

}  // namespace predserve::selection
