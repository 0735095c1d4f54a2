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

#include "predserve/selection/state_store.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"
#include "predserve/core/types.hpp"

namespace predserve::selection {

namespace {

std::uint64_t key_hash(const StateKey& k) {
  auto bytes = [](const std::string& s) {
    return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  };
  const std::uint8_t sep = 0;
  return fnv1a_64(bytes(k.context), fnv1a_64({&sep, 1}, fnv1a_64(bytes(k.app))));
}

std::string hex(const std::string& s) {
  std::string out;
  out.reserve(s.size() * 2);
  for (unsigned char c : s) out += fmt::format("{:02x}", c);
  return out;
}

}  // namespace

std::size_t StateKeyHash::operator()(const StateKey& k) const noexcept {
  return static_cast<std::size_t>(key_hash(k));
}

ContextStateStore::ContextStateStore(std::size_t max_contexts) : max_contexts_(max_contexts) {
  if (max_contexts == 0) throw InvalidArgument("max_contexts must be at least 1");
}

std::optional<Blob> ContextStateStore::lookup_cached(const StateKey& key) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second.lru);
  return it->second.blob;
}

void ContextStateStore::put_cached(const StateKey& key, Blob blob, bool overwrite) {
  std::lock_guard lock(mu_);
  if (auto it = entries_.find(key); it != entries_.end()) {
    if (overwrite) it->second.blob = std::move(blob);
    lru_.splice(lru_.begin(), lru_, it->second.lru);
    return;
  }
  lru_.push_front(key);
  entries_.emplace(key, Entry{std::move(blob), lru_.begin()});
  while (entries_.size() > max_contexts_) {
    entries_.erase(lru_.back());
    lru_.pop_back();
    ++evictions_;
  }
}

std::optional<Blob> ContextStateStore::get(const StateKey& key) {
  if (auto cached = lookup_cached(key)) return cached;
  auto loaded = load(key);
  // A concurrent update may have cached a newer blob meanwhile.
  if (loaded) put_cached(key, *loaded, false);
  return loaded;
}

Blob ContextStateStore::update(const StateKey& key, const StateUpdate& fn) {
  std::lock_guard stripe(stripes_[StateKeyHash{}(key) % kStripes]);
  std::optional<Blob> current = lookup_cached(key);
  if (!current) current = load(key);
  Blob next = fn(current);
  store(key, next);
  put_cached(key, next, true);
  return next;
}

std::size_t ContextStateStore::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::uint64_t ContextStateStore::evictions() const {
  std::lock_guard lock(mu_);
  return evictions_;
}

FileStateStore::FileStateStore(std::filesystem::path dir, std::size_t max_contexts)
    : ContextStateStore(max_contexts), dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw ConfigError(fmt::format("cannot create state directory '{}': {}", dir_.string(),
                                  ec.message()));
  }
}

std::filesystem::path FileStateStore::path_for(const StateKey& key) const {
  return dir_ / fmt::format("{}.{}.state", hex(key.app), hex(key.context));
}

std::optional<Blob> FileStateStore::load(const StateKey& key) {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  return Blob(std::istreambuf_iterator<char>(in), {});
}

void FileStateStore::store(const StateKey& key, const Blob& blob) {
  const auto path = path_for(key);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Unavailable(fmt::format("cannot write '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace predserve::selection
