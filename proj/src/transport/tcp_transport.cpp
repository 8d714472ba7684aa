#include "nups/transport/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "nups/transport/wire.hpp"

namespace nups {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw RoutingError("tcp: " + what + ": " + std::strerror(errno));
}

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, buf, n, 0);
    if (r <= 0) {
      if (r < 0 && errno == EINTR) continue;
      return false;
    }
    buf += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, buf, n, MSG_NOSIGNAL);
    if (w <= 0) {
      if (w < 0 && errno == EINTR) continue;
      return false;
    }
    buf += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

sockaddr_in make_addr(const TcpEndpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw RoutingError("tcp: bad IPv4 address '" + ep.host + "'");
  }
  return addr;
}

}  // namespace

TcpTransport::TcpTransport(std::vector<TcpEndpoint> endpoints, std::vector<NodeId> local_nodes)
    : endpoints_(std::move(endpoints)),
      local_(endpoints_.size(), false),
      listen_fds_(endpoints_.size(), -1),
      handlers_(endpoints_.size()) {
  for (NodeId q : local_nodes) {
    if (q >= endpoints_.size()) throw RoutingError("tcp: local node out of range");
    local_[q] = true;
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail("socket");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(endpoints_[q]);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) fail("bind");
    if (::listen(fd, 64) != 0) fail("listen");
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    endpoints_[q].port = ntohs(addr.sin_port);
    listen_fds_[q] = fd;
  }
  for (NodeId q : local_nodes) {
    acceptors_.emplace_back([this, fd = listen_fds_[q]](std::stop_token st) { accept_loop(st, fd); });
  }
}

TcpTransport::~TcpTransport() { close(); }

TcpEndpoint TcpTransport::endpoint(NodeId node) const { return endpoints_.at(node); }

void TcpTransport::attach(NodeId node, Handler handler) {
  if (node >= endpoints_.size() || !local_[node]) throw RoutingError("tcp: attach to non-local node");
  std::lock_guard lock(handlers_mu_);
  handlers_[node] = std::move(handler);
}

void TcpTransport::accept_loop(std::stop_token st, int listen_fd) {
  while (!st.stop_requested()) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(readers_mu_);
    if (closed_) {
      ::close(fd);
      return;
    }
    reader_fds_.push_back(fd);
    readers_.emplace_back([this, fd](std::stop_token rst) { read_loop(rst, fd); });
  }
}

void TcpTransport::read_loop(std::stop_token st, int fd) {
  std::vector<std::uint8_t> body;
  while (!st.stop_requested()) {
    std::uint8_t len_buf[wire::kLengthBytes];
    if (!read_exact(fd, len_buf, sizeof(len_buf))) return;
    const std::uint32_t len = static_cast<std::uint32_t>(len_buf[0]) | (static_cast<std::uint32_t>(len_buf[1]) << 8) |
                              (static_cast<std::uint32_t>(len_buf[2]) << 16) |
                              (static_cast<std::uint32_t>(len_buf[3]) << 24);
    body.resize(len);
    if (!read_exact(fd, body.data(), len)) return;
    try {
      deliver(wire::decode_body(body));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "tcp: dropping connection: %s\n", e.what());
      return;
    }
  }
}

void TcpTransport::deliver(Message&& m) {
  Handler* h = nullptr;
  {
    std::lock_guard lock(handlers_mu_);
    if (m.receiver < handlers_.size() && handlers_[m.receiver]) h = &handlers_[m.receiver];
  }
  if (h == nullptr) throw RoutingError("tcp: message for unattached node " + std::to_string(m.receiver));
  const Cause cause = m.cause;
  (*h)(std::move(m));
  on_delivered(cause);
  delivered_.fetch_add(1);
}

TcpTransport::Outgoing& TcpTransport::connection(NodeId from, NodeId to) {
  std::lock_guard lock(conn_mu_);
  auto& slot = outgoing_[{from, to}];
  if (slot) return *slot;

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail("socket");
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  const sockaddr_in addr = make_addr(endpoints_[to]);
  // Peers in other processes may still be starting up.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (std::chrono::steady_clock::now() > deadline) {
      ::close(fd);
      fail("connect to node " + std::to_string(to));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  slot = std::make_unique<Outgoing>();
  slot->fd = fd;
  Outgoing& out = *slot;
  out.writer = std::jthread([this, &out](std::stop_token st) { write_loop(st, out); });
  return out;
}

void TcpTransport::write_loop(std::stop_token st, Outgoing& out) {
  std::unique_lock lock(out.mu);
  while (true) {
    out.cv.wait(lock, st, [&] { return !out.queue.empty(); });
    if (out.queue.empty()) return;  // stop requested
    auto frame = std::move(out.queue.front());
    out.queue.pop_front();
    lock.unlock();
    const bool ok = write_all(out.fd, frame.data(), frame.size());
    lock.lock();
    if (!ok) return;
  }
}

void TcpTransport::send(Message msg) {
  if (closed_) throw RoutingError("tcp: transport closed");
  if (msg.receiver >= endpoints_.size()) {
    throw RoutingError("tcp: unknown receiver " + std::to_string(msg.receiver));
  }
  on_send(msg);
  sent_.fetch_add(1);
  auto frame = wire::encode(msg);
  Outgoing& out = connection(msg.sender, msg.receiver);
  {
    std::lock_guard lock(out.mu);
    out.queue.push_back(std::move(frame));
  }
  out.cv.notify_one();
}

void TcpTransport::close() {
  if (closed_.exchange(true)) return;
  // Let queued frames drain before tearing connections down.
  {
    std::lock_guard lock(conn_mu_);
    for (auto& [_, out] : outgoing_) {
      for (int i = 0; i < 500; ++i) {
        {
          std::lock_guard ol(out->mu);
          if (out->queue.empty()) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
      out->writer.request_stop();
      out->cv.notify_all();
      if (out->writer.joinable()) out->writer.join();
      ::shutdown(out->fd, SHUT_RDWR);
      ::close(out->fd);
    }
  }
  for (int fd : listen_fds_) {
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : acceptors_) {
    t.request_stop();
    if (t.joinable()) t.join();
  }
  for (int fd : listen_fds_) {
    if (fd >= 0) ::close(fd);
  }
  std::lock_guard lock(readers_mu_);
  for (int fd : reader_fds_) ::shutdown(fd, SHUT_RDWR);
  for (auto& t : readers_) {
    t.request_stop();
    if (t.joinable()) t.join();
  }
  for (int fd : reader_fds_) ::close(fd);
}

}  // namespace nups
