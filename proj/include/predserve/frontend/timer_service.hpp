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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <utility>

#include "predserve/core/clock.hpp"

namespace predserve::frontend {

// Runs callbacks at monotonic deadlines on one dedicated thread.
class TimerService {
 public:
  using TimerId = std::uint64_t;

  TimerService();
  ~TimerService();

  TimerService(const TimerService&) = delete;
  TimerService& operator=(const TimerService&) = delete;

  TimerId schedule(TimePoint when, std::function<void()> fn);
  // False when the timer already ran or was cancelled.
  bool cancel(TimerId id);
  std::size_t pending() const;

  // Runs every pending callback immediately, then stops the thread.
  void shutdown();

 private:
  using Key = std::pair<TimePoint, TimerId>;

  void run();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<Key, std::function<void()>> timers_;
  std::unordered_map<TimerId, TimePoint> index_;
  TimerId next_id_ = 1;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace predserve::frontend
