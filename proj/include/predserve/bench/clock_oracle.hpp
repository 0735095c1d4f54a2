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
#include <vector>

namespace predserve::bench {

// Reference CLOCK cache over integer keys: slots fill in index order, a hit
// sets the slot's reference bit, a newly inserted key starts unreferenced,
// and on a full table the hand clears set bits until it reaches an
// unreferenced victim.
class ClockOracle {
 public:
  explicit ClockOracle(std::size_t capacity);

  // True on a hit.
  bool access(std::uint64_t key);

  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t accesses() const noexcept { return accesses_; }
  double hit_rate() const noexcept;

 private:
  struct Slot {
    std::uint64_t key = 0;
    bool referenced = false;
  };
  std::vector<Slot> slots_;
  std::vector<std::int64_t> where_;  // key -> slot, grown on demand
  std::size_t used_ = 0;
  std::size_t hand_ = 0;
  std::uint64_t hits_ = 0;
  std::uint64_t accesses_ = 0;
};

}  // namespace predserve::bench
