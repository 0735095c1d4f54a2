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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/core/types.hpp"

namespace predserve::model {

struct CacheKey {
  ModelName model;
  InputPayload input;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

struct CacheKeyHash {
  std::size_t operator()(const CacheKey& k) const noexcept;
};

// Receives the Output, or nullopt when the evaluation failed or was skipped.
using CacheWaiter = std::function<void(const std::optional<Output>&)>;

// Invoked once per newly pending key to start its evaluation. The deadline
// is the one supplied by the request that created the entry.
using MissHandler = std::function<void(const CacheKey&, TimePoint deadline)>;

enum class LookupResult {
  kHit,          // waiter already ran with the cached Output
  kJoined,       // evaluation already in flight; waiter queued
  kMissStarted,  // new pending entry; miss handler ran
};

// Memoizes Predict(model, input) with CLOCK eviction.
//
// Entries are Pending (evaluation in flight, holding waiters) or Complete.
// Pending entries are never evicted. When every slot is Pending, further
// pending keys are tracked outside the slot table and are not cached once
// they complete.
class PredictionCache {
 public:
  explicit PredictionCache(std::size_t capacity = 1u << 16);

  void set_miss_handler(MissHandler handler);

  // True iff a Complete entry exists. On a miss, creates the Pending entry
  // once (concurrent requests coalesce) and starts the evaluation.
  bool request(const ModelName& model, const InputPayload& input,
               TimePoint deadline = TimePoint::max());

  // Non-blocking. Sets the reference bit on a hit.
  std::optional<Output> fetch(const ModelName& model, const InputPayload& input);

  // request() that also subscribes to the result. On a hit the waiter runs
  // inline before returning.
  LookupResult lookup_or_subscribe(const ModelName& model, const InputPayload& input,
                                   CacheWaiter waiter, TimePoint deadline = TimePoint::max());

  // Resolve a pending key. Waiters run on the calling thread, outside the
  // cache lock. Unknown keys are ignored.
  void complete(const CacheKey& key, Output output);
  void fail(const CacheKey& key);

  std::size_t capacity() const noexcept { return slots_.size(); }
  // Live entries in the slot table, Pending and Complete.
  std::size_t size() const;
  std::size_t pending_overflow() const;

  std::uint64_t requests() const noexcept { return requests_.load(); }
  std::uint64_t hits() const noexcept { return hits_.load(); }
  std::uint64_t misses() const noexcept { return misses_.load(); }
  std::uint64_t evictions() const noexcept { return evictions_.load(); }

 private:
  struct Slot {
    std::optional<CacheKey> key;
    std::optional<Output> output;  // set iff Complete
    std::vector<CacheWaiter> waiters;
    bool referenced = false;
  };

  LookupResult lookup(CacheKey key, CacheWaiter* waiter, std::optional<Output>* hit,
                      TimePoint deadline);
  // Returns a free or evicted slot index; nullopt when all slots are pending.
  std::optional<std::size_t> claim_slot_locked();
  std::vector<CacheWaiter> resolve(const CacheKey& key, std::optional<Output> output);

  mutable std::mutex mu_;
  std::vector<Slot> slots_;
  std::unordered_map<CacheKey, std::size_t, CacheKeyHash> index_;
  std::unordered_map<CacheKey, std::vector<CacheWaiter>, CacheKeyHash> overflow_;
  std::vector<std::size_t> free_;
  std::size_t hand_ = 0;
  MissHandler on_miss_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> evictions_{0};
};

}  // namespace predserve::model
