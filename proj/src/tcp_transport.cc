/*
 * Copyright 2026 The detrust Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "detrust/errors.h"
#include "detrust/transport.h"

namespace detrust::transport {

struct TcpNetwork::Local {
  Endpoint* endpoint = nullptr;
  std::mutex endpoint_mu;
  std::deque<Envelope> inbox;
  int listen_fd = -1;
};

TcpNetwork::TcpNetwork(std::map<std::string, Address> directory)
    : directory_(std::move(directory)) {}

TcpNetwork::~TcpNetwork() { Shutdown(); }

void TcpNetwork::Attach(const std::string& id, Endpoint* endpoint) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& local = locals_[id];
    if (!local) local = std::make_unique<Local>();
    local->endpoint = endpoint;
  }
  Listen(id);
}

void TcpNetwork::AddMailbox(const std::string& id) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto& local = locals_[id];
    if (!local) local = std::make_unique<Local>();
  }
  Listen(id);
}

Address TcpNetwork::AddressOf(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = directory_.find(id);
  if (it == directory_.end()) throw ConfigError("no address configured for " + id);
  return it->second;
}

void TcpNetwork::Listen(const std::string& id) {
  Address addr;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = directory_.find(id);
    if (it == directory_.end()) throw ConfigError("no address configured for " + id);
    addr = it->second;
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw ConfigError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<uint16_t>(addr.port));
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1) {
    ::close(fd);
    throw ConfigError("bad host " + addr.host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 || ::listen(fd, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw ConfigError("cannot listen on " + addr.host + ":" + std::to_string(addr.port) +
                      " for " + id + ": " + err);
  }
  socklen_t len = sizeof(sa);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  std::lock_guard<std::mutex> lock(mu_);
  directory_[id].port = ntohs(sa.sin_port);
  locals_[id]->listen_fd = fd;
  fds_.push_back(fd);
  threads_.emplace_back([this, fd, id] { AcceptLoop(fd, id); });
}

void TcpNetwork::AcceptLoop(int listen_fd, const std::string& id) {
  for (;;) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) return;
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    fds_.push_back(fd);
    threads_.emplace_back([this, fd, id] { ReadLoop(fd, id); });
  }
}

void TcpNetwork::ReadLoop(int fd, const std::string& id) {
  std::string buffer;
  char chunk[65536];
  for (;;) {
    const ssize_t got = ::recv(fd, chunk, sizeof(chunk), 0);
    if (got <= 0) return;
    buffer.append(chunk, static_cast<size_t>(got));
    size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      Envelope env;
      try {
        env = ParseEnvelopeLine(line);
      } catch (const ProtocolError& e) {
        std::lock_guard<std::mutex> lock(mu_);
        protocol_errors_.push_back(e.what());
        cv_.notify_all();
        ::shutdown(fd, SHUT_RDWR);
        return;
      }
      {
        std::lock_guard<std::mutex> lock(mu_);
        if (stopping_) return;
      }
      Dispatch(id, env);
    }
  }
}

void TcpNetwork::Dispatch(const std::string& id, const Envelope& env) {
  Local* local;
  {
    std::lock_guard<std::mutex> lock(mu_);
    local = locals_.at(id).get();
    if (local->endpoint == nullptr) {
      local->inbox.push_back(env);
      cv_.notify_all();
      return;
    }
  }
  std::lock_guard<std::mutex> lock(local->endpoint_mu);
  local->endpoint->OnMessage(env, *this);
}

int TcpNetwork::ConnectionTo(const std::string& id) {
  if (auto it = outbound_.find(id); it != outbound_.end()) return it->second;
  Address addr;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = directory_.find(id);
    if (it == directory_.end()) throw PeerDisconnected("no address for " + id);
    addr = it->second;
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<uint16_t>(addr.port));
  ::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr);
  if (fd < 0 || ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    if (fd >= 0) ::close(fd);
    throw PeerDisconnected("cannot connect to " + id + " at " + addr.host + ":" +
                           std::to_string(addr.port));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  outbound_[id] = fd;
  std::lock_guard<std::mutex> lock(mu_);
  fds_.push_back(fd);
  return fd;
}

void TcpNetwork::Send(Envelope env) {
  ValidatePayload(env);
  // The send lock covers stamping too, so seq order equals wire order.
  std::lock_guard<std::mutex> lock(send_mu_);
  const std::string line = Stamp(env) + "\n";
  const int fd = ConnectionTo(env.receiver);
  size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::send(fd, line.data() + off, line.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      outbound_.erase(env.receiver);
      throw PeerDisconnected("write to " + env.receiver + " failed");
    }
    off += static_cast<size_t>(n);
  }
}

std::vector<Envelope> TcpNetwork::Collect(const std::string& mailbox, size_t expected,
                                          std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(mu_);
  Local* local = locals_.at(mailbox).get();
  cv_.wait_for(lock, timeout, [&] { return local->inbox.size() >= expected; });
  std::vector<Envelope> out(std::make_move_iterator(local->inbox.begin()),
                            std::make_move_iterator(local->inbox.end()));
  local->inbox.clear();
  return out;
}

std::vector<std::string> TcpNetwork::protocol_errors() const {
  std::lock_guard<std::mutex> lock(mu_);
  return protocol_errors_;
}

void TcpNetwork::Shutdown() {
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) return;
    stopping_ = true;
    for (int fd : fds_) ::shutdown(fd, SHUT_RDWR);
  }
  // Reader threads may still append threads while we drain; loop until empty.
  for (;;) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (threads_.empty()) break;
      threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    threads.clear();
  }
  std::lock_guard<std::mutex> lock(mu_);
  for (int fd : fds_) ::close(fd);
  fds_.clear();
}

}  // namespace detrust::transport
