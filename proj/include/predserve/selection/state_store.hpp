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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace predserve::selection {

struct StateKey {
  std::string app;
  std::string context;

  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const noexcept;
};

using Blob = std::vector<std::uint8_t>;
// Receives the current blob (nullopt when absent) and returns the new one.
using StateUpdate = std::function<Blob(const std::optional<Blob>&)>;

// Per-(application, context) selection state with LRU eviction. update() is
// atomic per key; get() never waits on an update in progress.
class ContextStateStore {
 public:
  explicit ContextStateStore(std::size_t max_contexts);
  virtual ~ContextStateStore() = default;

  std::optional<Blob> get(const StateKey& key);
  Blob update(const StateKey& key, const StateUpdate& fn);

  std::size_t size() const;
  std::size_t max_contexts() const noexcept { return max_contexts_; }
  std::uint64_t evictions() const;

 protected:
  // Backend hooks for state outside the in-memory LRU.
  virtual std::optional<Blob> load(const StateKey& key) = 0;
  virtual void store(const StateKey& key, const Blob& blob) = 0;

 private:
  struct Entry {
    Blob blob;
    std::list<StateKey>::iterator lru;
  };

  std::optional<Blob> lookup_cached(const StateKey& key);
  void put_cached(const StateKey& key, Blob blob, bool overwrite);

  static constexpr std::size_t kStripes = 64;

  const std::size_t max_contexts_;
  std::array<std::mutex, kStripes> stripes_;
  mutable std::mutex mu_;
  std::unordered_map<StateKey, Entry, StateKeyHash> entries_;
  std::list<StateKey> lru_;  // front = most recent
  std::uint64_t evictions_ = 0;
};

// Evicted contexts are dropped and restart from the initial state.
class InMemoryStateStore final : public ContextStateStore {
 public:
  explicit InMemoryStateStore(std::size_t max_contexts = 1u << 20)
      : ContextStateStore(max_contexts) {}

 protected:
  std::optional<Blob> load(const StateKey&) override { return std::nullopt; }
  void store(const StateKey&, const Blob&) override {}
};

// Write-through to one file per context under a directory; the LRU bounds
// only the in-memory copy.
class FileStateStore final : public ContextStateStore {
 public:
  FileStateStore(std::filesystem::path dir, std::size_t max_contexts = 1u << 20);

  std::filesystem::path path_for(const StateKey& key) const;

 protected:
  std::optional<Blob> load(const StateKey& key) override;
  void store(const StateKey& key, const Blob& blob) override;

 private:
  std::filesystem::path dir_;
};

}  // namespace predserve::selection
