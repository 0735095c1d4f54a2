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

#include "predserve/rpc/wire.hpp"

#include <cstring>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::rpc {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_bytes(std::vector<std::uint8_t>& out, std::span<const std::uint8_t> bytes) {
  if (bytes.size() > kMaxPayloadSize) throw EncodeError("field exceeds payload cap");
  put_u32(out, static_cast<std::uint32_t>(bytes.size()));
  out.insert(out.end(), bytes.begin(), bytes.end());
}

void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
  put_bytes(out, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

bool is_known_type(std::uint32_t t) {
  return t >= static_cast<std::uint32_t>(MessageType::kHandshake) &&
         t <= static_cast<std::uint32_t>(MessageType::kError);
}

// Bounds-checked cursor over a payload.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint32_t u32() {
    need(4);
    const auto v = get_u32(data_.data() + pos_);
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::string utf8() {
    const auto len = u32();
    auto raw = bytes(len);
    std::string s(raw.begin(), raw.end());
    if (!is_valid_utf8(s)) throw ProtocolError("string field is not valid UTF-8");
    return s;
  }

  void finish() const {
    if (pos_ != data_.size()) {
      throw ProtocolError(fmt::format("{} trailing payload bytes", data_.size() - pos_));
    }
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ProtocolError("payload truncated");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void SpanSource::read_exact(std::span<std::uint8_t> out) {
  if (data_.size() - pos_ < out.size()) {
    pos_ = data_.size();
    throw ConnectionClosed("stream truncated");
  }
  if (!out.empty()) std::memcpy(out.data(), data_.data() + pos_, out.size());
  pos_ += out.size();
}

std::vector<std::uint8_t> encode_message(const WireMessage& msg) {
  if (msg.payload.size() > kMaxPayloadSize) {
    throw EncodeError(fmt::format("payload of {} bytes exceeds the {} byte cap",
                                  msg.payload.size(), kMaxPayloadSize));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + msg.payload.size());
  put_u32(out, static_cast<std::uint32_t>(msg.type));
  put_u32(out, static_cast<std::uint32_t>(msg.payload.size()));
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

WireMessage decode_message(ByteSource& source) {
  std::uint8_t header[kHeaderSize];
  source.read_exact(header);
  const auto type = get_u32(header);
  const auto len = get_u32(header + 4);
  if (!is_known_type(type)) throw ProtocolError(fmt::format("unknown msg_type {}", type));
  if (len > kMaxPayloadSize) {
    throw ProtocolError(fmt::format("payload_len {} exceeds the cap", len));
  }
  WireMessage msg{static_cast<MessageType>(type), std::vector<std::uint8_t>(len)};
  source.read_exact(msg.payload);
  return msg;
}

WireMessage encode_handshake(const HandshakePayload& p) {
  if (p.model_name.empty()) throw EncodeError("handshake model_name must be non-empty");
  WireMessage msg{MessageType::kHandshake, {}};
  put_string(msg.payload, p.model_name);
  put_u32(msg.payload, p.model_version);
  put_u32(msg.payload, static_cast<std::uint32_t>(p.input_type));
  return msg;
}

WireMessage encode_predict_request(const PredictRequestPayload& p) {
  if (p.inputs.empty()) throw EncodeError("predict request batch must be non-empty");
  WireMessage msg{MessageType::kPredictRequest, {}};
  put_u32(msg.payload, p.request_id);
  put_u32(msg.payload, static_cast<std::uint32_t>(p.inputs.size()));
  for (const auto& in : p.inputs) put_bytes(msg.payload, in.bytes());
  if (msg.payload.size() > kMaxPayloadSize) throw EncodeError("batch exceeds payload cap");
  return msg;
}

WireMessage encode_predict_response(const PredictResponsePayload& p) {
  WireMessage msg{MessageType::kPredictResponse, {}};
  put_u32(msg.payload, p.request_id);
  put_u32(msg.payload, static_cast<std::uint32_t>(p.outputs.size()));
  for (const auto& outs : p.outputs) {
    put_u32(msg.payload, static_cast<std::uint32_t>(outs.size()));
    for (const auto& s : outs) put_string(msg.payload, s);
  }
  if (msg.payload.size() > kMaxPayloadSize) throw EncodeError("response exceeds payload cap");
  return msg;
}

WireMessage encode_error(const ErrorPayload& p) {
  WireMessage msg{MessageType::kError, {}};
  put_u32(msg.payload, p.request_id);
  put_string(msg.payload, p.message);
  return msg;
}

HandshakePayload decode_handshake(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  HandshakePayload p;
  p.model_name = r.utf8();
  if (p.model_name.empty()) throw ProtocolError("handshake model_name is empty");
  p.model_version = r.u32();
  const auto tag = r.u32();
  const auto type = input_type_from_tag(tag);
  if (!type) throw ProtocolError(fmt::format("unknown input_type_tag {}", tag));
  p.input_type = *type;
  r.finish();
  return p;
}

PredictRequestPayload decode_predict_request(std::span<const std::uint8_t> payload,
                                             InputType input_type) {
  Reader r(payload);
  PredictRequestPayload p;
  p.request_id = r.u32();
  const auto batch = r.u32();
  if (batch == 0) throw ProtocolError("predict request batch_size is 0");
  // Each input needs at least 4 bytes of length prefix.
  if (batch > payload.size() / 4) throw ProtocolError("batch_size exceeds payload");
  p.inputs.reserve(batch);
  const auto width = element_width(input_type);
  for (std::uint32_t i = 0; i < batch; ++i) {
    const auto len = r.u32();
    if (len == 0 || len % width != 0) {
      throw ProtocolError(fmt::format("input byte_len {} invalid for {}", len,
                                      input_type_name(input_type)));
    }
    auto raw = r.bytes(len);
    p.inputs.emplace_back(input_type, std::vector<std::uint8_t>(raw.begin(), raw.end()));
  }
  r.finish();
  return p;
}

PredictResponsePayload decode_predict_response(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  PredictResponsePayload p;
  p.request_id = r.u32();
  const auto batch = r.u32();
  if (batch > payload.size() / 4) throw ProtocolError("batch_size exceeds payload");
  p.outputs.resize(batch);
  for (auto& outs : p.outputs) {
    const auto count = r.u32();
    if (count > payload.size() / 4) throw ProtocolError("output_count exceeds payload");
    outs.reserve(count);
    for (std::uint32_t j = 0; j < count; ++j) outs.push_back(r.utf8());
  }
  r.finish();
  return p;
}

ErrorPayload decode_error(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  ErrorPayload p;
  p.request_id = r.u32();
  p.message = r.utf8();
  r.finish();
  return p;
}

}  // namespace predserve::rpc
