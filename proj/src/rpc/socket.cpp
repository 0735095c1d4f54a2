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

#include "predserve/rpc/socket.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "predserve/core/errors.hpp"

namespace predserve::rpc {

Fd& Fd::operator=(Fd&& o) noexcept {
  if (this != &o) {
    reset();
    fd_ = o.release();
  }
  return *this;
}

void Fd::reset() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

HostPort HostPort::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    throw InvalidArgument(fmt::format("address '{}' is not host:port", text));
  }
  HostPort hp;
  hp.host = text.substr(0, colon);
  if (hp.host.empty()) hp.host = "0.0.0.0";
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    hp.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw InvalidArgument(fmt::format("address '{}' has an invalid port", text));
  }
  return hp;
}

std::string HostPort::to_string() const { return fmt::format("{}:{}", host, port); }

namespace {

sockaddr_in resolve(const HostPort& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  const std::string host = addr.host == "localhost" ? "127.0.0.1" : addr.host;
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw ConnectionClosed(fmt::format("cannot resolve host '{}'", addr.host));
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return sa;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

int poll_one(int fd, short events, Duration timeout) {
  pollfd p{fd, events, 0};
  const auto ms = std::chrono::duration_cast<milliseconds>(timeout).count();
  for (;;) {
    const int rc = ::poll(&p, 1, static_cast<int>(std::max<long long>(ms, 0)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return rc;
    return p.revents;
  }
}

}  // namespace

TcpStream::TcpStream(Fd fd) : fd_(std::move(fd)) {
  if (fd_.valid()) set_nodelay(fd_.get());
}

TcpStream TcpStream::connect(const HostPort& addr, Duration timeout) {
  const sockaddr_in sa = resolve(addr);
  Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!fd.valid()) throw ConnectionClosed(fmt::format("socket(): {}", std::strerror(errno)));
  const int flags = ::fcntl(fd.get(), F_GETFL, 0);
  ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof(sa));
  if (rc < 0 && errno != EINPROGRESS) {
    throw ConnectionClosed(fmt::format("connect {}: {}", addr.to_string(), std::strerror(errno)));
  }
  if (rc < 0) {
    if (poll_one(fd.get(), POLLOUT, timeout) <= 0) {
      throw ConnectionClosed(fmt::format("connect {}: timed out", addr.to_string()));
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw ConnectionClosed(fmt::format("connect {}: {}", addr.to_string(), std::strerror(err)));
    }
  }
  ::fcntl(fd.get(), F_SETFL, flags);
  return TcpStream(std::move(fd));
}

void TcpStream::read_exact(std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    const auto n = ::recv(fd_.get(), out.data() + got, out.size() - got, 0);
    if (n > 0) {
      got += static_cast<std::size_t>(n);
    } else if (n == 0) {
      throw ConnectionClosed("peer closed the connection");
    } else if (errno != EINTR) {
      throw ConnectionClosed(fmt::format("recv: {}", std::strerror(errno)));
    }
  }
}

void TcpStream::write_all(std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd_.get(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && errno != EINTR) {
      throw ConnectionClosed(fmt::format("send: {}", std::strerror(errno)));
    }
  }
}

bool TcpStream::wait_readable(Duration timeout) {
  const int rc = poll_one(fd_.get(), POLLIN, timeout);
  return rc > 0;
}

void TcpStream::shutdown() noexcept {
  if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

TcpListener TcpListener::bind(const HostPort& addr, int backlog) {
  TcpListener l;
  l.fd_ = Fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!l.fd_.valid()) throw ConnectionClosed(fmt::format("socket(): {}", std::strerror(errno)));
  int one = 1;
  ::setsockopt(l.fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const sockaddr_in sa = resolve(addr);
  if (::bind(l.fd_.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) < 0) {
    throw ConnectionClosed(fmt::format("bind {}: {}", addr.to_string(), std::strerror(errno)));
  }
  if (::listen(l.fd_.get(), backlog) < 0) {
    throw ConnectionClosed(fmt::format("listen: {}", std::strerror(errno)));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(l.fd_.get(), reinterpret_cast<sockaddr*>(&bound), &len);
  l.port_ = ntohs(bound.sin_port);
  return l;
}

std::optional<TcpStream> TcpListener::accept(Duration timeout) {
  if (!fd_.valid()) return std::nullopt;
  const int rc = poll_one(fd_.get(), POLLIN, timeout);
  if (rc <= 0 || !(rc & POLLIN)) return std::nullopt;
  const int fd = ::accept4(fd_.get(), nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) return std::nullopt;
  return TcpStream(Fd(fd));
}

void TcpListener::shutdown() noexcept {
  if (fd_.valid()) ::shutdown(fd_.get(), SHUT_RDWR);
}

void send_message(TcpStream& stream, const WireMessage& msg) {
  stream.write_all(encode_message(msg));
}

}  // namespace predserve::rpc
