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

#include "predserve/core/metrics.hpp"

#include <algorithm>
#include <string_view>

#include <fmt/format.h>

namespace predserve {

void Histogram::observe(Duration d) noexcept {
  const double ms = to_millis(d);
  const auto it = std::lower_bound(kBoundsMs.begin(), kBoundsMs.end(), ms);
  buckets_[static_cast<std::size_t>(it - kBoundsMs.begin())].fetch_add(1, std::memory_order_relaxed);
  count_.fetch_add(1, std::memory_order_relaxed);
  sum_us_.fetch_add(to_micros(d), std::memory_order_relaxed);
}

std::uint64_t Histogram::cumulative(std::size_t i) const noexcept {
  std::uint64_t total = 0;
  for (std::size_t b = 0; b <= i && b < buckets_.size(); ++b) {
    total += buckets_[b].load(std::memory_order_relaxed);
  }
  return total;
}

double Histogram::sum_ms() const noexcept {
  return static_cast<double>(sum_us_.load(std::memory_order_relaxed)) / 1000.0;
}

namespace {

template <typename T>
T& get_or_create(std::map<std::string, std::unique_ptr<T>>& m, const std::string& name) {
  auto& slot = m[name];
  if (!slot) slot = std::make_unique<T>();
  return *slot;
}

// "name{a=\"b\"}" + suffix/label -> merged series name.
std::string with_label(const std::string& name, std::string_view suffix, std::string_view label) {
  const auto brace = name.find('{');
  const std::string base = name.substr(0, brace);
  std::string labels = brace == std::string::npos ? "" : name.substr(brace + 1, name.size() - brace - 2);
  if (!label.empty()) labels = labels.empty() ? std::string(label) : labels + "," + std::string(label);
  return labels.empty() ? base + std::string(suffix) : fmt::format("{}{}{{{}}}", base, suffix, labels);
}

}  // namespace

Counter& MetricsRegistry::counter(const std::string& name) {
  std::lock_guard lock(mu_);
  return get_or_create(counters_, name);
}

Gauge& MetricsRegistry::gauge(const std::string& name) {
  std::lock_guard lock(mu_);
  return get_or_create(gauges_, name);
}

Histogram& MetricsRegistry::histogram(const std::string& name) {
  std::lock_guard lock(mu_);
  return get_or_create(histograms_, name);
}

std::string MetricsRegistry::render() const {
  std::map<std::string, std::string> lines;
  std::lock_guard lock(mu_);
  for (const auto& [name, c] : counters_) lines[name] = fmt::format("{}", c->value());
  for (const auto& [name, g] : gauges_) lines[name] = fmt::format("{}", g->value());
  for (const auto& [name, h] : histograms_) {
    for (std::size_t i = 0; i < Histogram::kBoundsMs.size(); ++i) {
      lines[with_label(name, "_bucket", fmt::format("le=\"{}\"", Histogram::kBoundsMs[i]))] =
          fmt::format("{}", h->cumulative(i));
    }
    lines[with_label(name, "_bucket", "le=\"+Inf\"")] = fmt::format("{}", h->count());
    lines[with_label(name, "_count", "")] = fmt::format("{}", h->count());
    lines[with_label(name, "_sum", "")] = fmt::format("{}", h->sum_ms());
  }
  std::string out;
  for (const auto& [name, value] : lines) out += fmt::format("{} {}\n", name, value);
  return out;
}

}  // namespace predserve
