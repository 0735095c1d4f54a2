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

#include "predserve/model/prediction_cache.hpp"

#include <string_view>

#include "predserve/core/errors.hpp"

namespace predserve::model {

std::size_t CacheKeyHash::operator()(const CacheKey& k) const noexcept {
  const auto* p = reinterpret_cast<const std::uint8_t*>(k.model.data());
  const std::uint64_t h = fnv1a_64({p, k.model.size()});
  return static_cast<std::size_t>(h ^ (k.input.hash() * 0x9e3779b97f4a7c15ULL));
}

PredictionCache::PredictionCache(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw InvalidArgument("cache capacity must be at least 1");
  free_.reserve(capacity);
  for (std::size_t i = capacity; i-- > 0;) free_.push_back(i);
  index_.reserve(capacity);
}

void PredictionCache::set_miss_handler(MissHandler handler) {
  std::lock_guard lock(mu_);
  on_miss_ = std::move(handler);
}

bool PredictionCache::request(const ModelName& model, const InputPayload& input,
                              TimePoint deadline) {
  return lookup({model, input}, nullptr, nullptr, deadline) == LookupResult::kHit;
}

std::optional<Output> PredictionCache::fetch(const ModelName& model, const InputPayload& input) {
  std::lock_guard lock(mu_);
  auto it = index_.find(CacheKey{model, input});
  if (it == index_.end()) return std::nullopt;
  Slot& slot = slots_[it->second];
  if (!slot.output) return std::nullopt;
  slot.referenced = true;
  return slot.output;
}

LookupResult PredictionCache::lookup_or_subscribe(const ModelName& model,
                                                  const InputPayload& input,
                                                  CacheWaiter waiter, TimePoint deadline) {
  std::optional<Output> hit;
  const auto result = lookup({model, input}, &waiter, &hit, deadline);
  if (result == LookupResult::kHit && waiter) waiter(hit);
  return result;
}

LookupResult PredictionCache::lookup(CacheKey key, CacheWaiter* waiter,
                                     std::optional<Output>* hit, TimePoint deadline) {
  requests_.fetch_add(1, std::memory_order_relaxed);
  MissHandler handler;
  {
    std::lock_guard lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      Slot& slot = slots_[it->second];
      if (slot.output) {
        slot.referenced = true;
        hits_.fetch_add(1, std::memory_order_relaxed);
        if (hit != nullptr) *hit = slot.output;
        return LookupResult::kHit;
      }
      misses_.fetch_add(1, std::memory_order_relaxed);
      if (waiter != nullptr && *waiter) slot.waiters.push_back(std::move(*waiter));
      return LookupResult::kJoined;
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    if (auto it = overflow_.find(key); it != overflow_.end()) {
      if (waiter != nullptr && *waiter) it->second.push_back(std::move(*waiter));
      return LookupResult::kJoined;
    }
    std::vector<CacheWaiter> waiters;
    if (waiter != nullptr && *waiter) waiters.push_back(std::move(*waiter));
    if (auto idx = claim_slot_locked()) {
      Slot& slot = slots_[*idx];
      slot.key = key;
      slot.output.reset();
      slot.waiters = std::move(waiters);
      slot.referenced = false;
      index_.emplace(key, *idx);
    } else {
      overflow_.emplace(key, std::move(waiters));
    }
    handler = on_miss_;
  }
  if (handler) handler(key, deadline);
  return LookupResult::kMissStarted;
}

std::optional<std::size_t> PredictionCache::claim_slot_locked() {
  if (!free_.empty()) {
    const auto idx = free_.back();
    free_.pop_back();
    return idx;
  }
  // Two sweeps clear every reference bit, so a Complete slot is found if any exists.
  for (std::size_t step = 0; step < 2 * slots_.size(); ++step) {
    const std::size_t idx = hand_;
    hand_ = (hand_ + 1) % slots_.size();
    Slot& slot = slots_[idx];
    if (!slot.output) continue;
    if (slot.referenced) {
      slot.referenced = false;
      continue;
    }
    index_.erase(*slot.key);
    slot.key.reset();
    slot.output.reset();
    evictions_.fetch_add(1, std::memory_order_relaxed);
    return idx;
  }
  return std::nullopt;
}

std::vector<CacheWaiter> PredictionCache::resolve(const CacheKey& key,
                                                  std::optional<Output> output) {
  std::lock_guard lock(mu_);
  std::vector<CacheWaiter> waiters;
  if (auto it = index_.find(key); it != index_.end()) {
    Slot& slot = slots_[it->second];
    if (slot.output) return waiters;
    waiters.swap(slot.waiters);
    if (output) {
      slot.output = std::move(output);
    } else {
      free_.push_back(it->second);
      slot.key.reset();
      index_.erase(it);
    }
    return waiters;
  }
  if (auto it = overflow_.find(key); it != overflow_.end()) {
    waiters.swap(it->second);
    overflow_.erase(it);
    if (output) {
      if (auto idx = claim_slot_locked()) {
        Slot& slot = slots_[*idx];
        slot.key = key;
        slot.output = std::move(output);
        slot.referenced = false;
        index_.emplace(key, *idx);
      }
    }
  }
  return waiters;
}

void PredictionCache::complete(const CacheKey& key, Output output) {
  const Output copy = output;
  for (auto& w : resolve(key, std::move(output))) w(copy);
}

void PredictionCache::fail(const CacheKey& key) {
  for (auto& w : resolve(key, std::nullopt)) w(std::nullopt);
}

std::size_t PredictionCache::size() const {
  std::lock_guard lock(mu_);
  return index_.size();
}

std::size_t PredictionCache::pending_overflow() const {
  std::lock_guard lock(mu_);
  return overflow_.size();
}

}  // namespace predserve::model
