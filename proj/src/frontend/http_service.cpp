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

#include "predserve/frontend/http_service.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "predserve/core/errors.hpp"

namespace predserve::frontend {

using nlohmann::json;

InputPayload input_from_json(const json& j, InputType type) {
  auto numbers = [&]() -> std::vector<double> {
    if (!j.is_array()) {
      throw InvalidArgument(fmt::format("{} input must be a JSON array", input_type_name(type)));
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& e : j) {
      if (!e.is_number()) throw InvalidArgument("input array must hold only numbers");
      out.push_back(e.get<double>());
    }
    return out;
  };
  switch (type) {
    case InputType::kString:
      if (!j.is_string()) throw InvalidArgument("string input must be a JSON string");
      return InputPayload::from_string(j.get<std::string>());
    case InputType::kBytes: {
      if (j.is_string()) {
        const auto s = j.get<std::string>();
        return InputPayload::from_bytes(
            std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      }
      std::vector<std::uint8_t> bytes;
      for (double v : numbers()) {
        if (v < 0 || v > 255 || std::floor(v) != v) {
          throw InvalidArgument("bytes input elements must be integers in [0, 255]");
        }
        bytes.push_back(static_cast<std::uint8_t>(v));
      }
      return InputPayload::from_bytes(bytes);
    }
    case InputType::kInts: {
      std::vector<std::int32_t> ints;
      for (double v : numbers()) {
        if (std::floor(v) != v || v < std::numeric_limits<std::int32_t>::min() ||
            v > std::numeric_limits<std::int32_t>::max()) {
          throw InvalidArgument("ints input elements must be 32-bit integers");
        }
        ints.push_back(static_cast<std::int32_t>(v));
      }
      return InputPayload::from_ints(ints);
    }
    case InputType::kFloats: {
      std::vector<float> floats;
      for (double v : numbers()) floats.push_back(static_cast<float>(v));
      return InputPayload::from_floats(floats);
    }
    case InputType::kDoubles:
      return InputPayload::from_doubles(numbers());
  }
  throw InvalidArgument("unsupported input type");
}

json input_to_json(const InputPayload& input) {
  switch (input.type()) {
    case InputType::kString: return input.as_string();
    case InputType::kInts: return input.as_ints();
    case InputType::kFloats: return input.as_floats();
    case InputType::kDoubles: return input.as_doubles();
    case InputType::kBytes: {
      auto b = input.bytes();
      return std::vector<int>(b.begin(), b.end());
    }
  }
  return nullptr;
}

namespace {

HttpReply error_reply(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

int status_for(const ServingError& e) {
  switch (e.code()) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kUnavailable:
    case ErrorCode::kModelUnavailable: return 503;
    default: return 500;
  }
}

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw InvalidArgument(fmt::format("malformed JSON: {}", e.what()));
  }
}

std::string string_field(const json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw InvalidArgument(fmt::format("missing field '{}'", key));
    return {};
  }
  if (!it->is_string()) throw InvalidArgument(fmt::format("field '{}' must be a string", key));
  return it->get<std::string>();
}

const json& required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(fmt::format("missing field '{}'", key));
  return *it;
}

}  // namespace

HttpService::HttpService(ServingCore& core, ReloadSource reload_source,
                         std::size_t worker_threads)
    : core_(core), reload_source_(std::move(reload_source)), worker_threads_(worker_threads) {}

HttpService::~HttpService() { stop(); }

HttpReply HttpService::handle(const std::string& method, const std::string& path,
                              const std::string& body) {
  try {
    if (method == "POST" && path == "/api/v1/predict") return predict(body);
    if (method == "POST" && path == "/api/v1/feedback") return feedback(body);
    if (method == "GET" && path == "/metrics") {
      return {200, core_.render_metrics(), "text/plain; version=0.0.4"};
    }
    if (method == "POST" && path == "/admin/reload") return reload();
    constexpr std::string_view kState = "/admin/state/";
    if (method == "GET" && path.rfind(kState, 0) == 0) {
      const auto rest = path.substr(kState.size());
      const auto slash = rest.find('/');
      const auto app = rest.substr(0, slash);
      const auto context = slash == std::string::npos ? "" : rest.substr(slash + 1);
      if (app.empty()) return error_reply(404, "missing application name");
      return state(httplib::detail::decode_url(app, false),
                   httplib::detail::decode_url(context, false));
    }
    return error_reply(404, fmt::format("no route for {} {}", method, path));
  } catch (const ServingError& e) {
    return error_reply(status_for(e), e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {} failed: {}", method, path, e.what());
    return error_reply(500, e.what());
  }
}

HttpReply HttpService::predict(const std::string& body) {
  const auto j = parse_body(body);
  const auto app = string_field(j, "app", true);
  const auto context = string_field(j, "context_id", false);
  auto& frontend = core_.frontend();
  const auto type = frontend.app(app).input_type;
  auto input = input_from_json(required(j, "input"), type);
  const auto r = frontend.predict(app, context, std::move(input));
  const auto& p = r.prediction;
  json out{{"output", p.output.value},
           {"confidence", p.confidence},
           {"is_default", p.is_default},
           {"models_used", p.models_used},
           {"models_missing", p.models_missing},
           {"latency_micros", to_micros(r.latency)}};
  return {200, out.dump()};
}

HttpReply HttpService::feedback(const std::string& body) {
  const auto j = parse_body(body);
  Feedback fb{string_field(j, "app", true), string_field(j, "context_id", false),
              InputPayload::from_string("-"), Output(string_field(j, "label", true))};
  auto& frontend = core_.frontend();
  fb.input = input_from_json(required(j, "input"), frontend.app(fb.app_name).input_type);
  frontend.feedback(std::move(fb));
  return {202, json{{"status", "accepted"}}.dump()};
}

HttpReply HttpService::state(const std::string& app, const std::string& context) {
  return {200, core_.frontend().describe_state(app, context).dump()};
}

HttpReply HttpService::reload() {
  if (!reload_source_) return error_reply(404, "no configuration source to reload from");
  RuntimeConfig fresh;
  try {
    fresh = reload_source_();
  } catch (const ConfigError& e) {
    return error_reply(400, e.what());
  }
  return {200, json{{"applied", core_.reload(fresh)}}.dump()};
}

void HttpService::start(const rpc::HostPort& addr) {
  server_ = std::make_unique<httplib::Server>();
  const auto threads = worker_threads_;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle(req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  server_->Post("/api/v1/predict", route);
  server_->Post("/api/v1/feedback", route);
  server_->Post("/admin/reload", route);
  server_->Get("/metrics", route);
  server_->Get(R"(/admin/state/.*)", route);
  server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      res.set_content(json{{"error", "no route for " + req.method + " " + req.path}}.dump(),
                      "application/json");
    }
  });
  int port = addr.port == 0 ? server_->bind_to_any_port(addr.host)
                            : (server_->bind_to_port(addr.host, addr.port) ? addr.port : -1);
  if (port <= 0) {
    throw Unavailable(fmt::format("cannot listen on {}", addr.to_string()));
  }
  port_ = static_cast<std::uint16_t>(port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  spdlog::info("serving the application API on {}:{}", addr.host, port_);
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace predserve::frontend
