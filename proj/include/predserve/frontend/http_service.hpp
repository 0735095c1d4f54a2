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

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "json.hpp"
#include "predserve/frontend/config.hpp"
#include "predserve/frontend/serving_core.hpp"
#include "predserve/rpc/socket.hpp"

namespace httplib {
class Server;
}

namespace predserve::frontend {

struct HttpReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Decodes a JSON input for the given type: a string for String, an array of
// numbers for the numeric types, and an array of 0..255 or a string for
// Bytes. Throws InvalidArgument.
InputPayload input_from_json(const nlohmann::json& j, InputType type);
nlohmann::json input_to_json(const InputPayload& input);

// The application-facing JSON-over-HTTP API:
//   POST /api/v1/predict         {"app", "context_id"?, "input"}
//   POST /api/v1/feedback        {"app", "context_id"?, "input", "label"}
//   GET  /metrics
//   GET  /admin/state/{app}/{context}
//   POST /admin/reload
class HttpService {
 public:
  // reload_source produces a fresh config for /admin/reload; without one the
  // endpoint answers 404.
  using ReloadSource = std::function<RuntimeConfig()>;

  explicit HttpService(ServingCore& core, ReloadSource reload_source = {},
                       std::size_t worker_threads = 64);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Socket-free entry point shared by the server and tests.
  HttpReply handle(const std::string& method, const std::string& path, const std::string& body);

  // Binds and serves on a background thread. Port 0 picks a free port.
  void start(const rpc::HostPort& addr);
  std::uint16_t port() const noexcept { return port_; }
  void stop();

 private:
  HttpReply predict(const std::string& body);
  HttpReply feedback(const std::string& body);
  HttpReply state(const std::string& app, const std::string& context);
  HttpReply reload();

  ServingCore& core_;
  ReloadSource reload_source_;
  std::size_t worker_threads_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::uint16_t port_ = 0;
};

}  // namespace predserve::frontend
