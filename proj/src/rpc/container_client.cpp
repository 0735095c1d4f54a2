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

#include "predserve/rpc/container_client.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "predserve/core/errors.hpp"
#include "predserve/rpc/wire.hpp"

namespace predserve::rpc {

ContainerClient::ContainerClient(ContainerOptions options, BatchPredictFn predict)
    : options_(std::move(options)), predict_(std::move(predict)) {}

ContainerClient::~ContainerClient() { stop(); }

void ContainerClient::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { run(); });
}

void ContainerClient::stop() {
  running_ = false;
  drop_connection();
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void ContainerClient::drop_connection() {
  std::lock_guard lock(mu_);
  if (current_ != nullptr) current_->shutdown();
}

bool ContainerClient::wait_connected(Duration timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return connected_.load(); });
}

void ContainerClient::run() {
  int attempt = 0;
  while (running_) {
    try {
      TcpStream stream = TcpStream::connect(options_.core);
      {
        std::lock_guard lock(mu_);
        current_ = &stream;
      }
      try {
        send_message(stream, encode_handshake({options_.model_name, options_.model_version,
                                               options_.input_type}));
        {
          std::lock_guard lock(mu_);
          connected_ = true;
          ++connects_;
        }
        cv_.notify_all();
        attempt = 0;
        serve(stream);
      } catch (const std::exception& e) {
        spdlog::debug("container '{}' connection ended: {}", options_.model_name, e.what());
      }
      std::lock_guard lock(mu_);
      current_ = nullptr;
      connected_ = false;
    } catch (const std::exception& e) {
      spdlog::debug("container '{}' cannot reach core: {}", options_.model_name, e.what());
    }
    if (!running_) break;
    const auto backoff = std::min<Duration>(options_.backoff_cap,
                                            options_.backoff_base * (1LL << std::min(attempt, 16)));
    ++attempt;
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, backoff, [&] { return !running_.load(); });
  }
}

void ContainerClient::serve(TcpStream& stream) {
  for (;;) {
    WireMessage msg = decode_message(stream);
    switch (msg.type) {
      case MessageType::kHeartbeat:
        if (options_.answer_heartbeats) send_message(stream, heartbeat_message());
        break;
      case MessageType::kPredictRequest: {
        auto req = decode_predict_request(msg.payload, options_.input_type);
        WireMessage reply;
        try {
          auto outputs = predict_(req.inputs);
          if (outputs.size() != req.inputs.size()) {
            throw InvalidArgument(fmt::format("pred_batch returned {} outputs for {} inputs",
                                              outputs.size(), req.inputs.size()));
          }
          reply = encode_predict_response({req.request_id, std::move(outputs)});
        } catch (const std::exception& e) {
          reply = encode_error({req.request_id, e.what()});
        }
        ++batches_;
        send_message(stream, reply);
        break;
      }
      case MessageType::kError: {
        auto err = decode_error(msg.payload);
        throw ConnectionClosed(fmt::format("core reported: {}", err.message));
      }
      default:
        throw ProtocolError("unexpected message from core");
    }
  }
}

}  // namespace predserve::rpc
