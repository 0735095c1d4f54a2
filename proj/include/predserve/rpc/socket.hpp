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
#include <optional>
#include <span>
#include <string>

#include "predserve/core/clock.hpp"
#include "predserve/rpc/wire.hpp"

namespace predserve::rpc {

// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(o.release()) {}
  Fd& operator=(Fd&& o) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset() noexcept;

 private:
  int fd_ = -1;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  // "host:port"; throws InvalidArgument.
  static HostPort parse(const std::string& text);
  std::string to_string() const;
};

class TcpStream : public ByteSource {
 public:
  TcpStream() = default;
  explicit TcpStream(Fd fd);

  // Throws ConnectionClosed if the connection cannot be established.
  static TcpStream connect(const HostPort& addr, Duration timeout = seconds(2));

  void read_exact(std::span<std::uint8_t> out) override;
  void write_all(std::span<const std::uint8_t> data);

  // Waits until data is readable. Returns false on timeout.
  bool wait_readable(Duration timeout);

  // Unblocks pending reads in other threads; safe to call concurrently.
  void shutdown() noexcept;
  bool valid() const noexcept { return fd_.valid(); }
  int native_handle() const noexcept { return fd_.get(); }

 private:
  Fd fd_;
};

class TcpListener {
 public:
  // Port 0 picks an ephemeral port.
  static TcpListener bind(const HostPort& addr, int backlog = 128);

  // Returns nullopt on timeout or after shutdown().
  std::optional<TcpStream> accept(Duration timeout);
  std::uint16_t port() const noexcept { return port_; }
  void shutdown() noexcept;

 private:
  Fd fd_;
  std::uint16_t port_ = 0;
};

void send_message(TcpStream& stream, const WireMessage& msg);

}  // namespace predserve::rpc
