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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "predserve/rpc/connection.hpp"
#include "predserve/rpc/socket.hpp"

namespace predserve::rpc {

inline constexpr std::uint16_t kDefaultContainerPort = 7000;

// Accepts container-initiated connections, reads their Handshake and hands
// each new replica to the registration callback.
class ContainerServer {
 public:
  // Returns an empty string to accept the replica, or a rejection reason.
  using RegisterHandler = std::function<std::string(std::shared_ptr<ReplicaConnection>)>;
  using CloseHandler = std::function<void(std::shared_ptr<ReplicaConnection>)>;

  explicit ContainerServer(HostPort addr, LivenessOptions liveness = {},
                           Duration handshake_timeout = seconds(2));
  ~ContainerServer();

  ContainerServer(const ContainerServer&) = delete;
  ContainerServer& operator=(const ContainerServer&) = delete;

  void start(RegisterHandler on_register, CloseHandler on_close);
  void stop();

  std::uint16_t port() const noexcept { return listener_.port(); }
  std::size_t connection_count() const;

 private:
  void accept_loop();
  void monitor_loop();
  void handle_new(TcpStream stream);

  TcpListener listener_;
  const LivenessOptions liveness_;
  const Duration handshake_timeout_;
  RegisterHandler on_register_;
  CloseHandler on_close_;

  mutable std::mutex mu_;
  std::map<std::uint64_t, std::shared_ptr<ReplicaConnection>> connections_;
  std::uint64_t next_id_ = 1;

  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread monitor_thread_;
};

}  // namespace predserve::rpc
