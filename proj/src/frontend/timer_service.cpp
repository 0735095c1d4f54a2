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

#include "predserve/frontend/timer_service.hpp"

#include <vector>

#include <spdlog/spdlog.h>

namespace predserve::frontend {

TimerService::TimerService() : thread_([this] { run(); }) {}

TimerService::~TimerService() { shutdown(); }

TimerService::TimerId TimerService::schedule(TimePoint when, std::function<void()> fn) {
  TimerId id;
  bool earliest;
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      id = 0;
      earliest = false;
    } else {
      id = next_id_++;
      auto it = timers_.emplace(Key{when, id}, std::move(fn)).first;
      index_[id] = when;
      earliest = it == timers_.begin();
    }
  }
  if (id == 0) {
    fn();
    return 0;
  }
  if (earliest) cv_.notify_one();
  return id;
}

bool TimerService::cancel(TimerId id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  timers_.erase(Key{it->second, id});
  index_.erase(it);
  return true;
}

std::size_t TimerService::pending() const {
  std::lock_guard lock(mu_);
  return timers_.size();
}

void TimerService::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void TimerService::run() {
  std::unique_lock lock(mu_);
  while (true) {
    if (stopping_) break;
    if (timers_.empty()) {
      cv_.wait(lock);
      continue;
    }
    const auto due = timers_.begin()->first.first;
    if (Clock::now() < due) {
      cv_.wait_until(lock, due);
      continue;
    }
    auto node = timers_.extract(timers_.begin());
    index_.erase(node.key().second);
    lock.unlock();
    try {
      node.mapped()();
    } catch (const std::exception& e) {
      spdlog::error("timer callback threw: {}", e.what());
    }
    lock.lock();
  }
  // Flush whatever is left so no caller waits forever.
  while (!timers_.empty()) {
    auto node = timers_.extract(timers_.begin());
    index_.erase(node.key().second);
    lock.unlock();
    try {
      node.mapped()();
    } catch (const std::exception& e) {
      spdlog::error("timer callback threw: {}", e.what());
    }
    lock.lock();
  }
}

}  // namespace predserve::frontend
