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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "predserve/core/clock.hpp"

namespace predserve::bench {

struct ClosedLoop {
  std::uint32_t concurrency = 1;
};
struct Poisson {
  double rate = 1000;  // queries per second
};
// Poisson arrivals at on_rate for the first half of each period and at
// off_rate for the second half.
struct Burst {
  double on_rate = 1000;
  double off_rate = 100;
  Duration period{seconds(1)};
};
using Arrival = std::variant<ClosedLoop, Poisson, Burst>;

struct UniqueEach {};
// Item i in [0, universe) is drawn with probability proportional to
// 1 / (i + 1)^s.
struct Zipf {
  double s = 1.1;
  std::uint64_t universe = 1000;
};
using Popularity = std::variant<UniqueEach, Zipf>;

struct WorkloadSpec {
  Arrival arrival = Poisson{};
  // The stream ends at whichever of the two limits comes first. Closed-loop
  // streams need query_count.
  std::optional<std::uint64_t> query_count;
  std::optional<Duration> duration;
  double feedback_fraction = 0;
  Popularity popularity = UniqueEach{};

  // Throws InvalidArgument.
  void validate() const;
};

struct QueryEvent {
  // Offset from the start of the run; zero for closed-loop streams.
  Duration offset{0};
  std::uint64_t item = 0;
  bool feedback = false;
};

std::vector<QueryEvent> generate_workload(const WorkloadSpec& spec, std::uint64_t seed);

// Stable byte encoding of a stream, used to compare runs.
std::string encode_workload(const std::vector<QueryEvent>& events);

// Inverse-CDF sampler over a finite Zipf distribution.
class ZipfSampler {
 public:
  ZipfSampler(double s, std::uint64_t universe);
  template <typename Rng>
  std::uint64_t operator()(Rng& rng) const {
    return index_of(static_cast<double>(rng() >> 11) * 0x1.0p-53);
  }
  std::uint64_t index_of(double u) const;

 private:
  std::vector<double> cdf_;
};

}  // namespace predserve::bench
