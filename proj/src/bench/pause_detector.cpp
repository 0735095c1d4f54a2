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


#include "predserve/bench/pause_detector.hpp"

namespace predserve::bench {

PauseDetector::PauseDetector(Duration threshold, Duration period)
    : threshold_(threshold), period_(period), thread_([this] { run(); }) {}

PauseDetector::~PauseDetector() { stop(); }

void PauseDetector::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void PauseDetector::run() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    const auto due = Clock::now() + period_;
    if (cv_.wait_until(lock, due, [this] { return stopping_; })) break;
    const auto late = Clock::now() - due;
    if (late > threshold_) pauses_.fetch_add(1);
    auto seen = max_late_.load();
    while (late.count() > seen && !max_late_.compare_exchange_weak(seen, late.count())) {
    }
  }
}

}  // namespace predserve::bench
