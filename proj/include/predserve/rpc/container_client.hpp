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
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "predserve/core/types.hpp"
#include "predserve/rpc/socket.hpp"

namespace predserve::rpc {

// The batch prediction interface every container implements: one list of
// outputs per input, in input order.
using BatchPredictFn =
    std::function<std::vector<std::vector<std::string>>(const std::vector<InputPayload>&)>;

struct ContainerOptions {
  HostPort core{"127.0.0.1", 7000};
  std::string model_name;
  std::uint32_t model_version = 1;
  InputType input_type = InputType::kDoubles;
  Duration backoff_base{milliseconds(100)};
  Duration backoff_cap{seconds(5)};
  // Containers that never answer heartbeats, for liveness tests.
  bool answer_heartbeats = true;
};

// A C++ model container speaking the wire protocol: dials the core, sends
// its handshake and serves batches on one thread. Reconnects with
// exponential backoff whenever the connection drops.
class ContainerClient {
 public:
  ContainerClient(ContainerOptions options, BatchPredictFn predict);
  ~ContainerClient();

  ContainerClient(const ContainerClient&) = delete;
  ContainerClient& operator=(const ContainerClient&) = delete;

  void start();
  // Disconnects and stops reconnecting.
  void stop();
  // Drops the current connection; the client reconnects after backoff.
  void drop_connection();

  bool wait_connected(Duration timeout) const;
  bool connected() const noexcept { return connected_.load(); }
  std::uint64_t batches_served() const noexcept { return batches_.load(); }
  std::uint64_t connects() const noexcept { return connects_.load(); }
  const ContainerOptions& options() const noexcept { return options_; }

 private:
  void run();
  void serve(TcpStream& stream);

  const ContainerOptions options_;
  const BatchPredictFn predict_;

  std::atomic<bool> running_{false};
  std::atomic<bool> connected_{false};
  std::atomic<std::uint64_t> batches_{0};
  std::atomic<std::uint64_t> connects_{0};

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  TcpStream* current_ = nullptr;  // guarded by mu_
  std::thread thread_;
};

}  // namespace predserve::rpc
