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
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/rpc/socket.hpp"
#include "predserve/rpc/wire.hpp"

namespace predserve::rpc {

struct LivenessOptions {
  // A heartbeat goes out after this much send-side idleness.
  Duration heartbeat_interval{seconds(1)};
  // Unanswered heartbeats tolerated before the connection is dropped.
  int max_missed_heartbeats = 3;
};

// Core-side end of one container connection, established by a handshake.
//
// At most one PredictRequest is outstanding at a time. A request that times
// out stays outstanding (the replica is then "suspect") until its late
// response arrives or the connection closes; the next predict() waits for
// it first.
class ReplicaConnection : public std::enable_shared_from_this<ReplicaConnection> {
 public:
  using CloseHandler = std::function<void(ReplicaConnection&)>;
  using Outputs = std::vector<std::vector<std::string>>;

  ReplicaConnection(std::uint64_t id, HandshakePayload handshake, TcpStream stream,
                    LivenessOptions liveness = {});
  ~ReplicaConnection();

  ReplicaConnection(const ReplicaConnection&) = delete;
  ReplicaConnection& operator=(const ReplicaConnection&) = delete;

  // Starts the reader thread. on_close runs once, on the reader thread.
  void start(CloseHandler on_close);

  // Sends one batch and waits for its response. Throws ReplicaTimeout,
  // ConnectionClosed, ProtocolError (connection is then reset) or
  // ModelUnavailable when the container answered with an Error message.
  Outputs predict(std::span<const InputPayload> inputs, Duration timeout);

  // Heartbeat bookkeeping; driven periodically by the owning server.
  void tick(TimePoint now);

  void close() noexcept;

  std::uint64_t id() const noexcept { return id_; }
  const HandshakePayload& handshake() const noexcept { return handshake_; }
  bool closed() const noexcept { return closed_.load(); }
  bool suspect() const noexcept { return suspect_.load(); }
  int outstanding_requests() const;

 private:
  struct Pending {
    std::uint32_t request_id = 0;
    std::size_t batch_size = 0;
    bool abandoned = false;
    std::optional<Outputs> outputs;
    std::optional<std::string> error;
    bool done = false;
  };

  void reader_loop();
  void send(const WireMessage& msg);
  void fail_and_close(const std::string& why, bool protocol_violation = false) noexcept;
  [[noreturn]] void throw_closed(const std::string& context) const;

  const std::uint64_t id_;
  const HandshakePayload handshake_;
  const LivenessOptions liveness_;
  TcpStream stream_;

  std::mutex write_mu_;
  std::mutex predict_mu_;  // serializes callers of predict()

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::optional<Pending> pending_;
  std::uint32_t next_request_id_ = 1;
  TimePoint last_send_;
  int unanswered_heartbeats_ = 0;
  bool closed_by_protocol_error_ = false;
  std::string close_reason_;

  std::atomic<bool> closed_{false};
  std::atomic<bool> suspect_{false};
  CloseHandler on_close_;
  std::once_flag close_once_;
  std::thread reader_;
};

}  // namespace predserve::rpc
