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

#include "predserve/bench/synthetic.hpp"

#include <algorithm>
#include <thread>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::bench {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

void SyntheticModelSpec::validate() const {
  if (latency_fixed < Duration::zero() || latency_per_item < Duration::zero() ||
      jitter < Duration::zero()) {
    throw InvalidArgument("synthetic latencies must be >= 0");
  }
  auto check_rate = [](double r) {
    if (!(r >= 0 && r <= 1)) throw InvalidArgument(fmt::format("error rate {} not in [0, 1]", r));
  };
  check_rate(error_rate);
  for (const auto& w : error_schedule) {
    check_rate(w.rate);
    if (w.end < w.begin) throw InvalidArgument("error window ends before it begins");
  }
  if (labels.size() < 2) throw InvalidArgument("a synthetic model needs at least two labels");
}

double error_rate_at(const SyntheticModelSpec& spec, std::uint64_t query_index) {
  for (const auto& w : spec.error_schedule) {
    if (query_index >= w.begin && query_index < w.end) return w.rate;
  }
  return spec.error_rate;
}

bool synthetic_errs(const SyntheticModelSpec& spec, std::uint64_t query_index) {
  const double u = unit_interval(splitmix64(splitmix64(spec.seed) ^ query_index));
  return u < error_rate_at(spec, query_index);
}

std::string synthetic_output(const SyntheticModelSpec& spec, std::uint64_t query_index,
                             std::uint32_t truth) {
  const auto n = spec.labels.size();
  const auto t = truth % n;
  return synthetic_errs(spec, query_index) ? spec.labels[(t + 1) % n] : spec.labels[t];
}

Duration synthetic_latency(const SyntheticModelSpec& spec, std::size_t n, std::mt19937_64& rng) {
  auto latency = spec.latency_fixed + spec.latency_per_item * static_cast<std::int64_t>(n);
  if (spec.jitter > Duration::zero()) {
    std::normal_distribution<double> noise(0.0, static_cast<double>(spec.jitter.count()));
    latency += Duration(static_cast<Duration::rep>(noise(rng)));
  }
  return std::max(latency, Duration::zero());
}

InputPayload labelled_input(std::uint64_t query_index, std::uint32_t truth) {
  const std::int32_t v[2] = {static_cast<std::int32_t>(query_index & 0x7fffffff),
                             static_cast<std::int32_t>(truth)};
  return InputPayload::from_ints(v);
}

LabelledInput decode_labelled_input(const InputPayload& input) {
  const auto v = input.as_ints();
  if (v.size() != 2 || v[0] < 0 || v[1] < 0) {
    throw InvalidArgument("bench inputs are [query_index, label]");
  }
  return {static_cast<std::uint64_t>(v[0]), static_cast<std::uint32_t>(v[1])};
}

SyntheticModel::SyntheticModel(SyntheticModelSpec spec, std::uint64_t jitter_seed)
    : spec_(std::move(spec)), rng_(jitter_seed) {
  spec_.validate();
}

void SyntheticModel::track_batch_sizes(std::size_t max_index) {
  batch_sizes_ = std::vector<std::atomic<std::uint32_t>>(max_index);
}

std::uint32_t SyntheticModel::batch_size_of(std::uint64_t query_index) const {
  return query_index < batch_sizes_.size() ? batch_sizes_[query_index].load() : 0;
}

void SyntheticModel::set_latency_override(Duration latency) {
  override_ns_ = latency < Duration::zero() ? -1 : latency.count();
}

std::vector<std::vector<std::string>> SyntheticModel::predict(
    const std::vector<InputPayload>& inputs) {
  const auto start = Clock::now();
  std::vector<std::vector<std::string>> out;
  out.reserve(inputs.size());
  const auto n = static_cast<std::uint32_t>(inputs.size());
  for (const auto& in : inputs) {
    const auto q = decode_labelled_input(in);
    out.push_back({synthetic_output(spec_, q.query_index, q.truth)});
    if (q.query_index < batch_sizes_.size()) batch_sizes_[q.query_index] = n;
  }
  Duration latency;
  if (const auto o = override_ns_.load(); o >= 0) {
    latency = Duration(o);
  } else {
    std::lock_guard lock(rng_mu_);
    latency = synthetic_latency(spec_, inputs.size(), rng_);
  }
  std::this_thread::sleep_until(start + latency);
  busy_ns_ += (Clock::now() - start).count();
  items_ += n;
  batches_ += 1;
  return out;
}

}  // namespace predserve::bench
