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

#include "predserve/selection/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::selection {

BanditState BanditState::uniform(const std::vector<ModelName>& models, double eta) {
  if (models.empty()) throw InvalidArgument("bandit state needs at least one model");
  if (!(eta > 0)) throw InvalidArgument("eta must be positive");
  BanditState s;
  s.eta = eta;
  for (const auto& m : models) s.models[m] = ModelStats{};
  return s;
}

double BanditState::total_weight() const noexcept {
  double total = 0;
  for (const auto& [name, m] : models) total += m.weight;
  return total;
}

std::vector<double> BanditState::probabilities() const {
  const double total = total_weight();
  std::vector<double> p;
  p.reserve(models.size());
  for (const auto& [name, m] : models) p.push_back(m.weight / total);
  return p;
}

double BanditState::probability(const ModelName& model) const {
  auto it = models.find(model);
  if (it == models.end()) return 0.0;
  return it->second.weight / total_weight();
}

void BanditState::renormalize(double floor) {
  auto rescale = [this] {
    const double factor = static_cast<double>(models.size()) / total_weight();
    for (auto& [name, m] : models) {
      m.weight = std::max(m.weight * factor, std::numeric_limits<double>::min());
    }
  };
  rescale();
  if (floor > 0) {
    bool raised = false;
    for (auto& [name, m] : models) {
      if (m.weight < floor) {
        m.weight = floor;
        raised = true;
      }
    }
    if (raised) rescale();
  }
}

void BanditState::record_scalar(const ModelName& model, double x) {
  auto it = models.find(model);
  if (it == models.end() || !std::isfinite(x)) return;
  auto& m = it->second;
  m.count += 1;
  m.mean += (x - m.mean) / static_cast<double>(m.count);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class StateReader {
 public:
  explicit StateReader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw InvalidArgument("truncated selection state");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const BanditState& state) {
  std::vector<std::uint8_t> out;
  put<std::uint32_t>(out, BanditState::kVersion);
  put<double>(out, state.eta);
  put<std::uint64_t>(out, state.query_count);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.models.size()));
  for (const auto& [name, m] : state.models) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<double>(out, m.weight);
    put<double>(out, m.mean);
    put<std::uint64_t>(out, m.count);
  }
  return out;
}

BanditState deserialize_bandit(std::span<const std::uint8_t> bytes) {
  StateReader r(bytes);
  const auto version = r.get<std::uint32_t>();
  if (version != BanditState::kVersion) {
    throw InvalidArgument(fmt::format("unsupported selection state version {}", version));
  }
  BanditState s;
  s.eta = r.get<double>();
  s.query_count = r.get<std::uint64_t>();
  const auto k = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < k; ++i) {
    auto name = r.str(r.get<std::uint32_t>());
    ModelStats m;
    m.weight = r.get<double>();
    m.mean = r.get<double>();
    m.count = r.get<std::uint64_t>();
    if (!(m.weight > 0) || !std::isfinite(m.weight)) {
      throw InvalidArgument("selection state holds a non-positive weight");
    }
    s.models.emplace(std::move(name), m);
  }
  if (!r.done()) throw InvalidArgument("trailing bytes after selection state");
  if (s.models.empty() || !(s.eta > 0)) throw InvalidArgument("invalid selection state");
  return s;
}

const ModelName& exp3_select(const BanditState& state, Rng& rng) {
  if (state.models.empty()) throw InvalidArgument("no models to select from");
  const double total = state.total_weight();
  std::uniform_real_distribution<double> dist(0.0, total);
  const double u = dist(rng);
  double cumulative = 0;
  for (const auto& [name, m] : state.models) {
    cumulative += m.weight;
    if (u < cumulative) return name;
  }
  return state.models.rbegin()->first;
}

namespace {

double clamp_loss(double loss) {
  if (loss >= 0.0 && loss <= 1.0) return loss;
  spdlog::warn("loss {} outside [0,1]; clamping", loss);
  return std::isnan(loss) ? 1.0 : std::clamp(loss, 0.0, 1.0);
}

}  // namespace

void exp3_observe(BanditState& state, const ModelName& chosen, double loss, double weight_floor) {
  auto it = state.models.find(chosen);
  if (it == state.models.end()) {
    throw InvalidArgument(fmt::format("model '{}' has no weight", chosen));
  }
  loss = clamp_loss(loss);
  const double p = it->second.weight / state.total_weight();
  it->second.weight *= std::exp(-state.eta * loss / p);
  state.query_count += 1;
  state.renormalize(weight_floor);
}

void exp4_observe(BanditState& state, const Output& label, const OutputMap& preds,
                  const LossFn& loss, double weight_floor) {
  for (const auto& [name, pred] : preds) {
    auto it = state.models.find(name);
    if (it == state.models.end()) continue;
    it->second.weight *= std::exp(-state.eta * clamp_loss(compute_loss(loss, label, pred)));
    if (pred.parsed_scalar) state.record_scalar(name, *pred.parsed_scalar);
  }
  state.query_count += 1;
  state.renormalize(weight_floor);
}

bool agrees(const Output& pred, const Output& final_output, OutputKind kind,
            double agreement_tolerance) {
  if (kind == OutputKind::kScalar && pred.parsed_scalar && final_output.parsed_scalar) {
    const double f = *final_output.parsed_scalar;
    return std::abs(*pred.parsed_scalar - f) <= agreement_tolerance * std::max(1.0, std::abs(f));
  }
  return pred.value == final_output.value;
}

Combined exp4_combine(const BanditState& state, const OutputMap& available,
                      std::size_t selected_count, OutputKind kind, double agreement_tolerance) {
  if (available.empty()) throw InvalidArgument("combine needs at least one prediction");
  double total = 0;
  for (const auto& [name, out] : available) {
    auto it = state.models.find(name);
    if (it != state.models.end()) total += it->second.weight;
  }
  auto weight_of = [&](const ModelName& name) {
    auto it = state.models.find(name);
    if (it == state.models.end() || total <= 0) return 1.0 / static_cast<double>(available.size());
    return it->second.weight / total;
  };

  Combined result;
  bool scalar_done = false;
  if (kind == OutputKind::kScalar) {
    double num = 0, den = 0;
    for (const auto& [name, out] : available) {
      if (!out.parsed_scalar) continue;
      const double w = weight_of(name);
      num += w * *out.parsed_scalar;
      den += w;
    }
    if (den > 0) {
      result.output = Output::from_scalar(num / den);
      scalar_done = true;
    }
  }
  if (!scalar_done) {
    std::map<std::string, double> votes;  // ordered: ties go to the smallest label
    for (const auto& [name, out] : available) votes[out.value] += weight_of(name);
    auto best = votes.begin();
    for (auto it = votes.begin(); it != votes.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    result.output = Output(best->first);
  }
  for (const auto& [name, out] : available) {
    if (agrees(out, result.output, kind, agreement_tolerance)) ++result.agreeing;
  }
  const auto denom = std::max<std::size_t>(selected_count, available.size());
  result.confidence = static_cast<double>(result.agreeing) / static_cast<double>(denom);
  return result;
}

FinalPrediction combine_at_deadline(const BanditState& state, const AppConfig& app,
                                    const std::vector<ModelName>& selected,
                                    const OutputMap& available) {
  FinalPrediction fp;
  OutputMap inputs;
  for (const auto& name : selected) {
    if (auto it = available.find(name); it != available.end()) {
      inputs.emplace(name, it->second);
      ++fp.models_used;
      continue;
    }
    ++fp.models_missing;
    if (app.output_kind != OutputKind::kScalar) continue;
    auto s = state.models.find(name);
    if (s != state.models.end() && s->second.count > 0) {
      inputs.emplace(name, Output::from_scalar(s->second.mean));
    }
  }
  if (inputs.empty()) {
    fp.output = app.default_output;
    fp.confidence = 0.0;
    fp.is_default = true;
    return fp;
  }
  const auto combined =
      exp4_combine(state, inputs, selected.size(), app.output_kind, app.agreement_tolerance);
  fp.confidence = combined.confidence;
  if (fp.confidence < app.confidence_threshold) {
    fp.output = app.default_output;
    fp.is_default = true;
  } else {
    fp.output = combined.output;
  }
  return fp;
}

}  // namespace predserve::selection
