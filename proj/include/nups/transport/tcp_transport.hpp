#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nups/transport/transport.hpp"

namespace nups {

struct TcpEndpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Socket transport. One listening port per hosted node and one TCP connection
/// per ordered (sender, receiver) pair, which gives per-pair FIFO. Frames use
/// the layout in wire.hpp. Sends are queued and written by a per-connection
/// thread, so send() never blocks on the network.
class TcpTransport final : public Transport {
 public:
  /// `endpoints` is indexed by node id; `local_nodes` are hosted by this process.
  /// A local endpoint with port 0 binds an ephemeral port (see endpoint()).
  TcpTransport(std::vector<TcpEndpoint> endpoints, std::vector<NodeId> local_nodes);
  ~TcpTransport() override;

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  std::uint32_t num_nodes() const override { return static_cast<std::uint32_t>(endpoints_.size()); }
  void attach(NodeId node, Handler handler) override;
  void send(Message msg) override;
  std::uint64_t in_flight() const override { return sent_.load() - delivered_.load(); }

  TcpEndpoint endpoint(NodeId node) const;

  void close();

 private:
  struct Outgoing {
    int fd = -1;
    std::mutex mu;
    std::condition_variable_any cv;
    std::deque<std::vector<std::uint8_t>> queue;
    std::jthread writer;
  };

  void accept_loop(std::stop_token st, int listen_fd);
  void read_loop(std::stop_token st, int fd);
  void write_loop(std::stop_token st, Outgoing& out);
  Outgoing& connection(NodeId from, NodeId to);
  void deliver(Message&& m);

  std::vector<TcpEndpoint> endpoints_;
  std::vector<bool> local_;
  std::vector<int> listen_fds_;

  std::mutex handlers_mu_;
  std::vector<Handler> handlers_;

  std::mutex conn_mu_;
  std::map<std::pair<NodeId, NodeId>, std::unique_ptr<Outgoing>> outgoing_;

  std::mutex readers_mu_;
  std::vector<int> reader_fds_;
  std::vector<std::jthread> readers_;
  std::vector<std::jthread> acceptors_;

  std::atomic<std::uint64_t> sent_{0};
  std::atomic<std::uint64_t> delivered_{0};
  std::atomic<bool> closed_{false};
};

}  // namespace nups
