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

// Binary framing between the serving core and model containers.
//
//   header  := msg_type:u32 payload_len:u32        (little-endian, 8 bytes)
//   message := header payload[payload_len]
//
// Payload layouts (all integers u32 little-endian):
//
//   Handshake        name_len name[name_len] model_version input_type_tag
//   PredictRequest   request_id batch_size { byte_len bytes[byte_len] }*
//   PredictResponse  request_id batch_size { output_count { len utf8[len] }* }*
//   Heartbeat        (empty)
//   Error            request_id msg_len utf8[msg_len]

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "predserve/core/types.hpp"

namespace predserve::rpc {

enum class MessageType : std::uint32_t {
  kHandshake = 1,
  kPredictRequest = 2,
  kPredictResponse = 3,
  kHeartbeat = 4,
  kError = 5,
};

inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::uint32_t kMaxPayloadSize = 64u << 20;

struct WireMessage {
  MessageType type = MessageType::kHeartbeat;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

// Something that can produce exactly n bytes or fail. Implementations throw
// ConnectionClosed when the stream ends early.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual void read_exact(std::span<std::uint8_t> out) = 0;
};

class SpanSource : public ByteSource {
 public:
  explicit SpanSource(std::span<const std::uint8_t> data) : data_(data) {}
  void read_exact(std::span<std::uint8_t> out) override;
  std::size_t consumed() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

// Throws EncodeError when the payload exceeds kMaxPayloadSize.
std::vector<std::uint8_t> encode_message(const WireMessage& msg);

// Reads one header and its payload. Throws ProtocolError on an unknown type
// or an oversized payload, ConnectionClosed on truncation.
WireMessage decode_message(ByteSource& source);

struct HandshakePayload {
  std::string model_name;
  std::uint32_t model_version = 0;
  InputType input_type = InputType::kDoubles;

  friend bool operator==(const HandshakePayload&, const HandshakePayload&) = default;
};

struct PredictRequestPayload {
  std::uint32_t request_id = 0;
  std::vector<InputPayload> inputs;

  friend bool operator==(const PredictRequestPayload&,
                         const PredictRequestPayload&) = default;
};

struct PredictResponsePayload {
  std::uint32_t request_id = 0;
  std::vector<std::vector<std::string>> outputs;  // one list per input

  friend bool operator==(const PredictResponsePayload&,
                         const PredictResponsePayload&) = default;
};

struct ErrorPayload {
  std::uint32_t request_id = 0;
  std::string message;

  friend bool operator==(const ErrorPayload&, const ErrorPayload&) = default;
};

WireMessage encode_handshake(const HandshakePayload& p);
WireMessage encode_predict_request(const PredictRequestPayload& p);
WireMessage encode_predict_response(const PredictResponsePayload& p);
WireMessage encode_error(const ErrorPayload& p);
inline WireMessage heartbeat_message() { return {MessageType::kHeartbeat, {}}; }

// Payload decoders throw ProtocolError on malformed or trailing bytes.
HandshakePayload decode_handshake(std::span<const std::uint8_t> payload);
// Inputs are typed with the tag agreed in the handshake.
PredictRequestPayload decode_predict_request(std::span<const std::uint8_t> payload,
                                             InputType input_type);
PredictResponsePayload decode_predict_response(std::span<const std::uint8_t> payload);
ErrorPayload decode_error(std::span<const std::uint8_t> payload);

}  // namespace predserve::rpc
