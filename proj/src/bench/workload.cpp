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

#include "predserve/bench/workload.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "predserve/core/errors.hpp"

namespace predserve::bench {

void WorkloadSpec::validate() const {
  if (const auto* c = std::get_if<ClosedLoop>(&arrival)) {
    if (c->concurrency == 0) throw InvalidArgument("closed-loop concurrency must be > 0");
    if (!query_count) throw InvalidArgument("closed-loop workloads need a query count");
  } else if (const auto* p = std::get_if<Poisson>(&arrival)) {
    if (!(p->rate > 0)) throw InvalidArgument("Poisson rate must be > 0");
  } else if (const auto* b = std::get_if<Burst>(&arrival)) {
    if (!(b->on_rate > 0) || !(b->off_rate > 0)) throw InvalidArgument("burst rates must be > 0");
    if (b->period <= Duration::zero()) throw InvalidArgument("burst period must be > 0");
  }
  if (!query_count && !duration) throw InvalidArgument("workload needs a query count or duration");
  if (!(feedback_fraction >= 0 && feedback_fraction <= 1)) {
    throw InvalidArgument("feedback_fraction must be in [0, 1]");
  }
  if (const auto* z = std::get_if<Zipf>(&popularity)) {
    if (!(z->s > 0) || z->universe == 0) throw InvalidArgument("Zipf needs s > 0 and universe > 0");
  }
}

ZipfSampler::ZipfSampler(double s, std::uint64_t universe) : cdf_(universe) {
  double total = 0;
  for (std::uint64_t i = 0; i < universe; ++i) {
    total += std::pow(static_cast<double>(i + 1), -s);
    cdf_[i] = total;
  }
  for (auto& c : cdf_) c /= total;
}

std::uint64_t ZipfSampler::index_of(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::uint64_t>(it - cdf_.begin(), cdf_.size() - 1);
}

std::vector<QueryEvent> generate_workload(const WorkloadSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 arrivals(seed);
  std::mt19937_64 items(seed ^ 0x5bd1e9955bd1e995ULL);
  std::mt19937_64 feedback(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::optional<ZipfSampler> zipf;
  if (const auto* z = std::get_if<Zipf>(&spec.popularity)) zipf.emplace(z->s, z->universe);

  const bool closed = std::holds_alternative<ClosedLoop>(spec.arrival);
  std::vector<QueryEvent> out;
  double t_seconds = 0;
  for (std::uint64_t i = 0;; ++i) {
    if (spec.query_count && i >= *spec.query_count) break;
    QueryEvent e;
    if (!closed) {
      double rate;
      if (const auto* p = std::get_if<Poisson>(&spec.arrival)) {
        rate = p->rate;
      } else {
        const auto& b = std::get<Burst>(spec.arrival);
        const double period = to_millis(b.period) / 1000.0;
        rate = std::fmod(t_seconds, period) < period / 2 ? b.on_rate : b.off_rate;
      }
      t_seconds += std::exponential_distribution<double>(rate)(arrivals);
      e.offset = std::chrono::duration_cast<Duration>(std::chrono::duration<double>(t_seconds));
      if (spec.duration && e.offset >= *spec.duration) break;
    }
    e.item = zipf ? (*zipf)(items) : i;
    e.feedback = spec.feedback_fraction > 0 && coin(feedback) < spec.feedback_fraction;
    out.push_back(e);
  }
  return out;
}

std::string encode_workload(const std::vector<QueryEvent>& events) {
  std::string out;
  out.reserve(events.size() * 17);
  auto put = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  for (const auto& e : events) {
    put(static_cast<std::uint64_t>(e.offset.count()));
    put(e.item);
    out.push_back(e.feedback ? 1 : 0);
  }
  return out;
}

}  // namespace predserve::bench
