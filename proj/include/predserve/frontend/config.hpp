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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "predserve/core/clock.hpp"
#include "predserve/core/types.hpp"
#include "predserve/model/batch_sizing.hpp"
#include "predserve/rpc/socket.hpp"

namespace predserve::frontend {

// A parsed value of the configuration language: a TOML subset with
// [section] and [kind.name] headers, key = value lines, # comments, and
// values that are strings, numbers, booleans or single-line arrays.
struct ConfigValue {
  using Array = std::vector<std::variant<std::string, double>>;
  std::variant<std::string, double, bool, Array> value;
  int line = 0;
};

struct ConfigSection {
  std::string name;  // "service", "app.NAME", ...
  int line = 0;
  std::map<std::string, ConfigValue> entries;
};

// Throws ConfigError("source:line: message") on a syntax error, a duplicate
// section or a duplicate key.
std::vector<ConfigSection> parse_config_document(std::string_view text,
                                                 const std::string& source = "<config>");

struct ServiceConfig {
  rpc::HostPort listen_addr{"0.0.0.0", 8080};
  std::uint16_t container_port = 7000;
  std::uint64_t seed = 0;
  Duration combine_margin{milliseconds(1)};
  std::size_t feedback_queue = 10000;
};

struct CacheConfig {
  std::size_t capacity = 1u << 16;
};

struct StoreConfig {
  std::string backend = "memory";  // "memory" or "file"
  std::filesystem::path path;
  std::size_t max_contexts = 1u << 20;
};

struct ModelConfig {
  ModelName name;
  InputType input_type = InputType::kDoubles;
  model::BatchStrategy batch_strategy = model::BatchStrategy::kAimd;
  Duration batch_delay{0};
  std::uint32_t additive_step = model::kDefaultAdditiveStep;
  std::uint32_t max_batch_size = model::kMaxBatchCap;
  Duration replica_timeout{seconds(1)};
  // 0.9 x the smallest SLO among the applications that use the model.
  Duration batch_slo{milliseconds(18)};
};

struct RuntimeConfig {
  ServiceConfig service;
  CacheConfig cache;
  StoreConfig store;
  std::vector<AppConfig> apps;
  std::vector<ModelConfig> models;

  const AppConfig* find_app(std::string_view name) const;
  const ModelConfig* find_model(std::string_view name) const;
};

// Fraction of the application SLO granted to batch evaluation.
inline constexpr double kBatchSloFraction = 0.9;

// Validates every application and model and resolves each model's input type
// and batch SLO. Throws ConfigError with a line-precise message.
RuntimeConfig parse_config(std::string_view text, const std::string& source = "<config>");
RuntimeConfig load_config(const std::filesystem::path& path);

// Resolves model input types and batch SLOs from the applications; used by
// parse_config and by code assembling a RuntimeConfig directly.
void finalize_config(RuntimeConfig& config);

}  // namespace predserve::frontend
