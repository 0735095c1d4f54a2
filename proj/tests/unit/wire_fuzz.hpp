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

// Random well-formed wire messages shared by the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "predserve/core/types.hpp"
#include "predserve/rpc/wire.hpp"

namespace predserve::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789 .-_";
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(kAlphabet) - 2);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = kAlphabet[pick(rng)];
  // Mix in multi-byte UTF-8 now and then.
  if (!s.empty() && rng() % 4 == 0) s += "\xc3\xa9\xe2\x82\xac";
  return s;
}

inline InputPayload random_input(std::mt19937_64& rng, InputType type) {
  std::uniform_int_distribution<std::size_t> count(1, 16);
  const std::size_t n = count(rng);
  std::vector<std::uint8_t> bytes(n * element_width(type));
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
  if (type == InputType::kString) {
    auto text = random_text(rng, 1, 24);
    bytes.assign(text.begin(), text.end());
  }
  return InputPayload(type, std::move(bytes));
}

// Returns a message of a random type and the input tag its payload uses.
inline std::pair<rpc::WireMessage, InputType> random_message(std::mt19937_64& rng) {
  const auto type = static_cast<InputType>(rng() % 5);
  const auto id = static_cast<std::uint32_t>(rng());
  switch (rng() % 5) {
    case 0:
      return {rpc::encode_handshake({random_text(rng, 1, 32),
                                     static_cast<std::uint32_t>(rng()), type}),
              type};
    case 1: {
      rpc::PredictRequestPayload p{id, {}};
      const std::size_t batch = 1 + rng() % 8;
      for (std::size_t i = 0; i < batch; ++i) p.inputs.push_back(random_input(rng, type));
      return {rpc::encode_predict_request(p), type};
    }
    case 2: {
      rpc::PredictResponsePayload p{id, {}};
      const std::size_t batch = 1 + rng() % 8;
      for (std::size_t i = 0; i < batch; ++i) {
        std::vector<std::string> outs(rng() % 4);
        for (auto& o : outs) o = random_text(rng, 0, 16);
        p.outputs.push_back(std::move(outs));
      }
      return {rpc::encode_predict_response(p), type};
    }
    case 3:
      return {rpc::heartbeat_message(), type};
    default:
      return {rpc::encode_error({id, random_text(rng, 0, 40)}), type};
  }
}

// Decodes the typed payload and checks that re-encoding reproduces it.
inline bool payload_round_trips(const rpc::WireMessage& msg, InputType type) {
  switch (msg.type) {
    case rpc::MessageType::kHandshake:
      return rpc::encode_handshake(rpc::decode_handshake(msg.payload)) == msg;
    case rpc::MessageType::kPredictRequest:
      return rpc::encode_predict_request(rpc::decode_predict_request(msg.payload, type)) == msg;
    case rpc::MessageType::kPredictResponse:
      return rpc::encode_predict_response(rpc::decode_predict_response(msg.payload)) == msg;
    case rpc::MessageType::kHeartbeat:
      return msg.payload.empty();
    case rpc::MessageType::kError:
      return rpc::encode_error(rpc::decode_error(msg.payload)) == msg;
  }
  return false;
}

}  // namespace predserve::testing
