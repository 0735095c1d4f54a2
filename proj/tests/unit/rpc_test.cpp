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

#include <fstream>
#include <future>
#include <iterator>
#include <random>

#include "doctest.h"
#include "predserve/core/errors.hpp"
#include "predserve/rpc/connection.hpp"
#include "predserve/rpc/container_client.hpp"
#include "predserve/rpc/container_server.hpp"
#include "predserve/rpc/wire.hpp"
#include "wire_fuzz.hpp"

using namespace predserve;
using namespace predserve::rpc;

namespace {

std::vector<std::uint8_t> golden(const std::string& name) {
  std::ifstream in(std::string(PREDSERVE_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), {}};
}

WireMessage decode_all(const std::vector<std::uint8_t>& bytes) {
  SpanSource src(bytes);
  auto msg = decode_message(src);
  CHECK(src.consumed() == bytes.size());
  return msg;
}

}  // namespace

TEST_CASE("golden: heartbeat") {
  const auto bytes = encode_message(heartbeat_message());
  CHECK(bytes == std::vector<std::uint8_t>{4, 0, 0, 0, 0, 0, 0, 0});
  CHECK(bytes == golden("heartbeat.bin"));
  CHECK(decode_all(bytes) == heartbeat_message());
}

TEST_CASE("golden: predict request with one doubles input") {
  const std::vector<double> one{1.0};
  PredictRequestPayload req{1, {InputPayload::from_doubles(one)}};
  const auto bytes = encode_message(encode_predict_request(req));
  CHECK(bytes == golden("predict_request.bin"));
  auto msg = decode_all(bytes);
  CHECK(msg.type == MessageType::kPredictRequest);
  CHECK(decode_predict_request(msg.payload, InputType::kDoubles) == req);
}

TEST_CASE("golden: handshake, response and error") {
  HandshakePayload hs{"noop", 1, InputType::kDoubles};
  CHECK(encode_message(encode_handshake(hs)) == golden("handshake.bin"));
  CHECK(decode_handshake(decode_all(golden("handshake.bin")).payload) == hs);

  PredictResponsePayload resp{1, {{"cat"}, {"dog", "0.5"}}};
  CHECK(encode_message(encode_predict_response(resp)) == golden("predict_response.bin"));
  CHECK(decode_predict_response(decode_all(golden("predict_response.bin")).payload) == resp);

  ErrorPayload err{7, "boom"};
  CHECK(encode_message(encode_error(err)) == golden("error.bin"));
  CHECK(decode_error(decode_all(golden("error.bin")).payload) == err);
}

TEST_CASE("decode rejects unknown types, oversized payloads and truncation") {
  std::vector<std::uint8_t> bad_type{99, 0, 0, 0, 0, 0, 0, 0};
  SpanSource a(bad_type);
  CHECK_THROWS_AS(decode_message(a), ProtocolError);

  std::vector<std::uint8_t> too_big{4, 0, 0, 0, 0x01, 0x00, 0x00, 0x04};  // 64 MiB + 1
  SpanSource b(too_big);
  CHECK_THROWS_AS(decode_message(b), ProtocolError);

  auto bytes = golden("predict_request.bin");
  bytes.pop_back();
  SpanSource c(bytes);
  CHECK_THROWS_AS(decode_message(c), ConnectionClosed);

  std::vector<std::uint8_t> short_header{4, 0, 0};
  SpanSource d(short_header);
  CHECK_THROWS_AS(decode_message(d), ConnectionClosed);
}

TEST_CASE("decode consumes exactly one message") {
  auto stream = encode_message(heartbeat_message());
  auto second = golden("error.bin");
  stream.insert(stream.end(), second.begin(), second.end());
  SpanSource src(stream);
  CHECK(decode_message(src).type == MessageType::kHeartbeat);
  CHECK(src.consumed() == kHeaderSize);
  CHECK(decode_message(src).type == MessageType::kError);
  CHECK(src.consumed() == stream.size());
}

TEST_CASE("encode enforces the payload cap") {
  WireMessage big{MessageType::kHeartbeat, std::vector<std::uint8_t>(kMaxPayloadSize + 1)};
  CHECK_THROWS_AS(encode_message(big), EncodeError);
  WireMessage at_cap{MessageType::kHeartbeat, std::vector<std::uint8_t>(kMaxPayloadSize)};
  CHECK(encode_message(at_cap).size() == kHeaderSize + kMaxPayloadSize);
}

TEST_CASE("payload decoders reject malformed payloads") {
  std::vector<std::uint8_t> empty_batch{1, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decode_predict_request(empty_batch, InputType::kDoubles), ProtocolError);

  // byte_len 4 is not a whole double
  std::vector<std::uint8_t> ragged{1, 0, 0, 0, 1, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decode_predict_request(ragged, InputType::kDoubles), ProtocolError);
  CHECK_NOTHROW(decode_predict_request(ragged, InputType::kInts));

  auto trailing = encode_handshake({"m", 1, InputType::kInts}).payload;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_handshake(trailing), ProtocolError);

  std::vector<std::uint8_t> bad_tag{1, 0, 0, 0, 'm', 1, 0, 0, 0, 9, 0, 0, 0};
  CHECK_THROWS_AS(decode_handshake(bad_tag), ProtocolError);

  std::vector<std::uint8_t> bad_utf8{0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0xff};
  CHECK_THROWS_AS(decode_predict_response(bad_utf8), ProtocolError);

  CHECK_THROWS_AS(encode_handshake({"", 1, InputType::kInts}), EncodeError);
}

TEST_CASE("round trip property over fuzzed messages") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    auto [msg, tag] = predserve::testing::random_message(rng);
    const auto bytes = encode_message(msg);
    REQUIRE(bytes.size() == kHeaderSize + msg.payload.size());
    REQUIRE(decode_all(bytes) == msg);
    REQUIRE(predserve::testing::payload_round_trips(msg, tag));
  }
}

// ---------------------------------------------------------------------------
// Transport

namespace {

struct Harness {
  LivenessOptions liveness;
  std::unique_ptr<ContainerServer> server;
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::shared_ptr<ReplicaConnection>> registered;
  int closed = 0;

  explicit Harness(LivenessOptions l = {}) : liveness(l) {
    server = std::make_unique<ContainerServer>(HostPort{"127.0.0.1", 0}, liveness);
    server->start(
        [this](std::shared_ptr<ReplicaConnection> c) {
          std::lock_guard lock(mu);
          registered.push_back(std::move(c));
          cv.notify_all();
          return std::string{};
        },
        [this](std::shared_ptr<ReplicaConnection>) {
          std::lock_guard lock(mu);
          ++closed;
          cv.notify_all();
        });
  }

  std::shared_ptr<ReplicaConnection> wait_replica(std::size_t n = 1) {
    std::unique_lock lock(mu);
    REQUIRE(cv.wait_for(lock, seconds(5), [&] { return registered.size() >= n; }));
    return registered[n - 1];
  }

  bool wait_closed(int n, Duration timeout) {
    std::unique_lock lock(mu);
    return cv.wait_for(lock, timeout, [&] { return closed >= n; });
  }

  HostPort addr() const { return {"127.0.0.1", server->port()}; }
};

ContainerOptions opts(const Harness& h, const std::string& name,
                      InputType type = InputType::kString) {
  ContainerOptions o;
  o.core = h.addr();
  o.model_name = name;
  o.input_type = type;
  o.backoff_base = milliseconds(10);
  o.backoff_cap = milliseconds(50);
  return o;
}

std::vector<std::vector<std::string>> echo(const std::vector<InputPayload>& in) {
  std::vector<std::vector<std::string>> out;
  for (const auto& x : in) out.push_back({x.render()});
  return out;
}

// A hand-driven container for protocol-violation cases.
TcpStream raw_container(const Harness& h, const std::string& name) {
  auto s = TcpStream::connect(h.addr());
  send_message(s, encode_handshake({name, 1, InputType::kString}));
  return s;
}

}  // namespace

TEST_CASE("echo container answers a batch of 3") {
  Harness h;
  ContainerClient client(opts(h, "noop"), echo);
  client.start();
  auto conn = h.wait_replica();
  CHECK(conn->handshake().model_name == "noop");
  CHECK(conn->handshake().input_type == InputType::kString);

  std::vector<InputPayload> batch{InputPayload::from_string("a"), InputPayload::from_string("b"),
                                  InputPayload::from_string("c")};
  auto outs = conn->predict(batch, seconds(2));
  REQUIRE(outs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(outs[i].size() == 1);
    CHECK(outs[i][0] == batch[i].render());
  }
  CHECK(conn->outstanding_requests() == 0);
  CHECK(client.batches_served() == 1);
}

TEST_CASE("container-side pred_batch failure becomes an error reply") {
  Harness h;
  ContainerClient client(opts(h, "bad"), [](const std::vector<InputPayload>& in) {
    if (in.size() > 1) throw std::runtime_error("batch too large");
    return std::vector<std::vector<std::string>>{{"ok"}, {"extra"}};  // length mismatch
  });
  client.start();
  auto conn = h.wait_replica();
  std::vector<InputPayload> two{InputPayload::from_string("a"), InputPayload::from_string("b")};
  CHECK_THROWS_AS(conn->predict(two, seconds(2)), ModelUnavailable);
  std::vector<InputPayload> one{InputPayload::from_string("a")};
  CHECK_THROWS_AS(conn->predict(one, seconds(2)), ModelUnavailable);
  // The connection survives container-side errors.
  CHECK_FALSE(conn->closed());
}

TEST_CASE("response batch size mismatch is a protocol error") {
  Harness h;
  auto raw = raw_container(h, "liar");
  auto conn = h.wait_replica();
  auto fut = std::async(std::launch::async, [&] {
    std::vector<InputPayload> batch{InputPayload::from_string("a"),
                                    InputPayload::from_string("b")};
    return conn->predict(batch, seconds(2));
  });
  auto req_msg = decode_message(raw);
  auto req = decode_predict_request(req_msg.payload, InputType::kString);
  CHECK(req.inputs.size() == 2);
  send_message(raw, encode_predict_response({req.request_id, {{"only-one"}}}));
  CHECK_THROWS_AS(fut.get(), ProtocolError);
  CHECK(conn->closed());
}

TEST_CASE("mismatched request id resets the connection") {
  Harness h;
  auto raw = raw_container(h, "liar");
  auto conn = h.wait_replica();
  auto fut = std::async(std::launch::async, [&] {
    std::vector<InputPayload> batch{InputPayload::from_string("a")};
    return conn->predict(batch, seconds(2));
  });
  auto req = decode_predict_request(decode_message(raw).payload, InputType::kString);
  send_message(raw, encode_predict_response({req.request_id + 100, {{"x"}}}));
  CHECK_THROWS_AS(fut.get(), ProtocolError);
  CHECK(h.wait_closed(1, seconds(2)));
}

TEST_CASE("replica killed mid-request") {
  Harness h;
  auto raw = std::make_unique<TcpStream>(raw_container(h, "doomed"));
  auto conn = h.wait_replica();
  auto fut = std::async(std::launch::async, [&] {
    std::vector<InputPayload> batch{InputPayload::from_string("a")};
    return conn->predict(batch, seconds(5));
  });
  decode_message(*raw);
  raw.reset();  // process dies
  CHECK_THROWS_AS(fut.get(), ConnectionClosed);
  CHECK(h.wait_closed(1, seconds(2)));
  CHECK(h.server->connection_count() == 0);
}

TEST_CASE("timeout marks the replica suspect and keeps depth one") {
  Harness h;
  auto raw = raw_container(h, "slow");
  auto conn = h.wait_replica();
  std::vector<InputPayload> batch{InputPayload::from_string("a")};
  CHECK_THROWS_AS(conn->predict(batch, milliseconds(50)), ReplicaTimeout);
  CHECK(conn->suspect());
  CHECK(conn->outstanding_requests() == 1);

  // A second request cannot go out while the late one is outstanding.
  CHECK_THROWS_AS(conn->predict(batch, milliseconds(50)), ReplicaTimeout);

  auto first = decode_predict_request(decode_message(raw).payload, InputType::kString);
  // Nothing else was sent: the next bytes must be the late-answer-driven request.
  CHECK_FALSE(raw.wait_readable(milliseconds(20)));
  send_message(raw, encode_predict_response({first.request_id, {{"late"}}}));

  auto fut = std::async(std::launch::async, [&] { return conn->predict(batch, seconds(2)); });
  auto second = decode_predict_request(decode_message(raw).payload, InputType::kString);
  CHECK(second.request_id == first.request_id + 1);
  CHECK_FALSE(conn->suspect());
  send_message(raw, encode_predict_response({second.request_id, {{"fresh"}}}));
  CHECK(fut.get()[0][0] == "fresh");
}

TEST_CASE("silent containers are dropped after missed heartbeats") {
  Harness h(LivenessOptions{milliseconds(20), 3});
  auto o = opts(h, "mute");
  o.answer_heartbeats = false;
  ContainerClient mute(o, echo);
  mute.start();
  h.wait_replica();
  CHECK(h.wait_closed(1, seconds(3)));

  ContainerClient chatty(opts(h, "chatty"), echo);
  chatty.start();
  auto conn = h.wait_replica(2);
  std::this_thread::sleep_for(milliseconds(300));
  CHECK_FALSE(conn->closed());
}

TEST_CASE("client reconnects after the connection drops") {
  Harness h;
  ContainerClient client(opts(h, "flappy"), echo);
  client.start();
  auto first = h.wait_replica(1);
  client.drop_connection();
  CHECK(h.wait_closed(1, seconds(2)));
  auto second = h.wait_replica(2);
  CHECK(second->id() != first->id());
  std::vector<InputPayload> batch{InputPayload::from_string("z")};
  CHECK(second->predict(batch, seconds(2))[0][0] == "z");
  CHECK(client.connects() == 2);
}
