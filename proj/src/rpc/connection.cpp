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

#include "predserve/rpc/connection.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"

namespace predserve::rpc {

ReplicaConnection::ReplicaConnection(std::uint64_t id, HandshakePayload handshake,
                                     TcpStream stream, LivenessOptions liveness)
    : id_(id),
      handshake_(std::move(handshake)),
      liveness_(liveness),
      stream_(std::move(stream)),
      last_send_(Clock::now()) {}

ReplicaConnection::~ReplicaConnection() {
  close();
  if (reader_.joinable()) {
    if (reader_.get_id() == std::this_thread::get_id()) {
      reader_.detach();
    } else {
      reader_.join();
    }
  }
}

void ReplicaConnection::start(CloseHandler on_close) {
  on_close_ = std::move(on_close);
  reader_ = std::thread([this] { reader_loop(); });
}

int ReplicaConnection::outstanding_requests() const {
  std::lock_guard lock(mu_);
  return pending_ && !pending_->done ? 1 : 0;
}

void ReplicaConnection::send(const WireMessage& msg) {
  auto bytes = encode_message(msg);
  std::lock_guard lock(write_mu_);
  stream_.write_all(bytes);
}

ReplicaConnection::Outputs ReplicaConnection::predict(std::span<const InputPayload> inputs,
                                                      Duration timeout) {
  std::lock_guard serial(predict_mu_);
  const auto deadline = Clock::now() + timeout;
  std::unique_lock lock(mu_);

  // Depth-1 pipelining: drain a previously abandoned request first.
  if (!cv_.wait_until(lock, deadline, [&] {
        return closed_.load() || !pending_ || pending_->done;
      })) {
    throw ReplicaTimeout(fmt::format("replica {} still busy with a late batch", id_));
  }
  if (closed_) throw_closed("is disconnected");

  PredictRequestPayload req;
  req.request_id = next_request_id_++;
  req.inputs.assign(inputs.begin(), inputs.end());
  pending_ = Pending{req.request_id, inputs.size(), false, std::nullopt, std::nullopt, false};
  last_send_ = Clock::now();
  lock.unlock();

  try {
    send(encode_predict_request(req));
  } catch (const ConnectionClosed& e) {
    fail_and_close(e.what());
    throw;
  }

  lock.lock();
  const bool ready = cv_.wait_until(lock, deadline, [&] {
    return closed_.load() || (pending_ && pending_->done);
  });
  if (!ready) {
    pending_->abandoned = true;
    suspect_ = true;
    throw ReplicaTimeout(fmt::format("replica {} ({}) did not answer request {} in time",
                                     id_, handshake_.model_name, req.request_id));
  }
  if (!pending_ || !pending_->done) throw_closed("disconnected mid-request");
  Pending done = std::move(*pending_);
  pending_.reset();
  lock.unlock();

  if (done.error) {
    throw ModelUnavailable(fmt::format("replica {} reported: {}", id_, *done.error));
  }
  if (done.outputs->size() != done.batch_size) {
    const auto why = fmt::format("response batch_size {} != request batch_size {}",
                                 done.outputs->size(), done.batch_size);
    fail_and_close(why, true);
    throw ProtocolError(why);
  }
  return std::move(*done.outputs);
}

void ReplicaConnection::tick(TimePoint now) {
  if (closed_) return;
  bool drop = false;
  {
    std::lock_guard lock(mu_);
    if (pending_ && !pending_->done) return;  // busy, not idle
    if (now - last_send_ < liveness_.heartbeat_interval) return;
    if (unanswered_heartbeats_ >= liveness_.max_missed_heartbeats) {
      drop = true;
    } else {
      ++unanswered_heartbeats_;
      last_send_ = now;
    }
  }
  if (drop) {
    spdlog::warn("replica {} ({}) missed {} heartbeats; disconnecting", id_,
                 handshake_.model_name, liveness_.max_missed_heartbeats);
    fail_and_close("missed heartbeats");
    return;
  }
  try {
    send(heartbeat_message());
  } catch (const std::exception& e) {
    fail_and_close(e.what());
  }
}

void ReplicaConnection::close() noexcept {
  closed_ = true;
  stream_.shutdown();
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

void ReplicaConnection::fail_and_close(const std::string& why,
                                       bool protocol_violation) noexcept {
  std::lock_guard lock(mu_);
  if (!closed_.exchange(true)) {
    spdlog::info("replica {} ({}) connection closed: {}", id_, handshake_.model_name, why);
    closed_by_protocol_error_ = protocol_violation;
    close_reason_ = why;
  }
  stream_.shutdown();
  cv_.notify_all();
}

void ReplicaConnection::throw_closed(const std::string& context) const {
  const auto what = fmt::format("replica {} {}: {}", id_, context,
                                close_reason_.empty() ? "closed" : close_reason_);
  if (closed_by_protocol_error_) throw ProtocolError(what);
  throw ConnectionClosed(what);
}

void ReplicaConnection::reader_loop() {
  // Keeps this object alive until the close handler has run.
  auto self = weak_from_this().lock();
  try {
    for (;;) {
      WireMessage msg = decode_message(stream_);
      std::unique_lock lock(mu_);
      unanswered_heartbeats_ = 0;
      switch (msg.type) {
        case MessageType::kHeartbeat:
          break;
        case MessageType::kPredictResponse: {
          lock.unlock();
          auto resp = decode_predict_response(msg.payload);
          lock.lock();
          if (!pending_ || pending_->done || pending_->request_id != resp.request_id) {
            throw ProtocolError(fmt::format("unexpected response for request_id {}",
                                            resp.request_id));
          }
          if (pending_->abandoned) {
            // Late answer to a timed-out batch; the replica is healthy again.
            pending_.reset();
            suspect_ = false;
          } else {
            pending_->outputs = std::move(resp.outputs);
            pending_->done = true;
          }
          cv_.notify_all();
          break;
        }
        case MessageType::kError: {
          auto err = decode_error(msg.payload);
          if (!pending_ || pending_->done || pending_->request_id != err.request_id) {
            spdlog::warn("replica {} error (request {}): {}", id_, err.request_id, err.message);
            break;
          }
          if (pending_->abandoned) {
            pending_.reset();
            suspect_ = false;
          } else {
            pending_->error = std::move(err.message);
            pending_->done = true;
          }
          cv_.notify_all();
          break;
        }
        case MessageType::kHandshake:
        case MessageType::kPredictRequest:
          throw ProtocolError("container sent a core-only message type");
      }
    }
  } catch (const ConnectionClosed& e) {
    fail_and_close(e.what());
  } catch (const ProtocolError& e) {
    fail_and_close(fmt::format("protocol error: {}", e.what()), true);
  } catch (const std::exception& e) {
    fail_and_close(e.what());
  }
  if (on_close_) {
    std::call_once(close_once_, [&] { on_close_(*this); });
  }
}

}  // namespace predserve::rpc
