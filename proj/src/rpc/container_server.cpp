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

#include "predserve/rpc/container_server.hpp"

#include <vector>

#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::rpc {

ContainerServer::ContainerServer(HostPort addr, LivenessOptions liveness,
                                 Duration handshake_timeout)
    : listener_(TcpListener::bind(addr)),
      liveness_(liveness),
      handshake_timeout_(handshake_timeout) {}

ContainerServer::~ContainerServer() { stop(); }

void ContainerServer::start(RegisterHandler on_register, CloseHandler on_close) {
  on_register_ = std::move(on_register);
  on_close_ = std::move(on_close);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
  monitor_thread_ = std::thread([this] { monitor_loop(); });
  spdlog::info("accepting model containers on port {}", port());
}

void ContainerServer::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (monitor_thread_.joinable()) monitor_thread_.join();
  std::map<std::uint64_t, std::shared_ptr<ReplicaConnection>> conns;
  {
    std::lock_guard lock(mu_);
    conns.swap(connections_);
  }
  for (auto& [id, c] : conns) c->close();
}

std::size_t ContainerServer::connection_count() const {
  std::lock_guard lock(mu_);
  return connections_.size();
}

void ContainerServer::accept_loop() {
  while (running_) {
    auto stream = listener_.accept(milliseconds(100));
    if (!stream) continue;
    try {
      handle_new(std::move(*stream));
    } catch (const std::exception& e) {
      spdlog::warn("rejected container connection: {}", e.what());
    }
  }
}

void ContainerServer::handle_new(TcpStream stream) {
  if (!stream.wait_readable(handshake_timeout_)) {
    throw ProtocolError("no handshake within timeout");
  }
  WireMessage first = decode_message(stream);
  if (first.type != MessageType::kHandshake) {
    throw ProtocolError("first message was not a handshake");
  }
  HandshakePayload hs = decode_handshake(first.payload);

  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
  }
  auto conn = std::make_shared<ReplicaConnection>(id, hs, std::move(stream), liveness_);
  {
    std::lock_guard lock(mu_);
    connections_[id] = conn;
  }
  // The reader must be running before the replica receives any work.
  conn->start([this](ReplicaConnection& c) {
    std::shared_ptr<ReplicaConnection> owned;
    {
      std::lock_guard lock(mu_);
      auto it = connections_.find(c.id());
      if (it != connections_.end()) {
        owned = it->second;
        connections_.erase(it);
      }
    }
    if (owned && on_close_) on_close_(owned);
  });
  const std::string rejection = on_register_ ? on_register_(conn) : std::string{};
  if (!rejection.empty()) {
    spdlog::warn("rejecting container '{}': {}", hs.model_name, rejection);
    conn->close();
    return;
  }
  spdlog::info("registered replica {} for model '{}' v{} ({})", id, hs.model_name,
               hs.model_version, input_type_name(hs.input_type));
}

void ContainerServer::monitor_loop() {
  const auto period = std::max<Duration>(liveness_.heartbeat_interval / 4, milliseconds(5));
  while (running_) {
    std::this_thread::sleep_for(std::min<Duration>(period, milliseconds(100)));
    std::vector<std::shared_ptr<ReplicaConnection>> snapshot;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, c] : connections_) snapshot.push_back(c);
    }
    const auto now = Clock::now();
    for (auto& c : snapshot) c->tick(now);
  }
}

}  // namespace predserve::rpc
