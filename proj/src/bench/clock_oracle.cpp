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

#include "predserve/bench/clock_oracle.hpp"

namespace predserve::bench {

ClockOracle::ClockOracle(std::size_t capacity) : slots_(capacity) {}

double ClockOracle::hit_rate() const noexcept {
  return accesses_ == 0 ? 0.0 : static_cast<double>(hits_) / static_cast<double>(accesses_);
}

bool ClockOracle::access(std::uint64_t key) {
  accesses_ += 1;
  if (key >= where_.size()) where_.resize(key + 1, -1);
  if (const auto s = where_[key]; s >= 0) {
    slots_[static_cast<std::size_t>(s)].referenced = true;
    hits_ += 1;
    return true;
  }
  std::size_t victim;
  if (used_ < slots_.size()) {
    victim = used_++;
  } else {
    while (slots_[hand_].referenced) {
      slots_[hand_].referenced = false;
      hand_ = (hand_ + 1) % slots_.size();
    }
    victim = hand_;
    hand_ = (hand_ + 1) % slots_.size();
    where_[slots_[victim].key] = -1;
  }
  slots_[victim] = {key, false};
  where_[key] = static_cast<std::int64_t>(victim);
  return false;
}

}  // namespace predserve::bench
