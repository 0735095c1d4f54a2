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
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <thread>

#include "predserve/core/clock.hpp"

namespace predserve::bench {

// Measures how late a timed wait returns on an otherwise idle thread. Late
// wakeups above the threshold are scheduling pauses outside the process
// under test.
class PauseDetector {
 public:
  explicit PauseDetector(Duration threshold, Duration period = milliseconds(2));
  ~PauseDetector();

  PauseDetector(const PauseDetector&) = delete;
  PauseDetector& operator=(const PauseDetector&) = delete;

  void stop();

  std::uint64_t pauses() const { return pauses_.load(); }
  Duration max_lateness() const { return Duration(max_late_.load()); }

 private:
  void run();

  const Duration threshold_;
  const Duration period_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::atomic<std::uint64_t> pauses_{0};
  std::atomic<Duration::rep> max_late_{0};
  std::thread thread_;
};

}  // namespace predserve::bench
