#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>

#include "nups/transport/message.hpp"

namespace nups {

/// Message layer between nodes. Delivery is exactly-once and FIFO per ordered
/// (sender, receiver) pair; there is no loss model.
class Transport {
 public:
  using Handler = std::function<void(Message&&)>;
  using Tap = std::function<void(const Message&)>;

  virtual ~Transport() = default;

  virtual std::uint32_t num_nodes() const = 0;

  /// Registers the receive handler of a node hosted by this transport.
  virtual void attach(NodeId node, Handler handler) = 0;

  /// Throws RoutingError for an unknown receiver.
  virtual void send(Message msg) = 0;

  /// Messages sent but not yet handed to a handler (as seen by this process).
  virtual std::uint64_t in_flight() const = 0;

  /// In-flight messages other than replica synchronization traffic.
  std::uint64_t in_flight_excluding_sync() const { return non_sync_in_flight_.load(); }

  MessageStats stats() const { return counters_.snapshot(); }

  /// Observes every message at send time. Test and tracing hook.
  void set_tap(Tap tap) {
    std::lock_guard lock(tap_mu_);
    tap_ = std::move(tap);
  }

 protected:
  void on_send(const Message& m) {
    counters_.count(m);
    if (m.cause != Cause::Sync) non_sync_in_flight_.fetch_add(1);
    std::lock_guard lock(tap_mu_);
    if (tap_) tap_(m);
  }

  /// Call after the receiving handler returned.
  void on_delivered(Cause cause) {
    if (cause != Cause::Sync) non_sync_in_flight_.fetch_sub(1);
  }

 private:
  MessageCounters counters_;
  std::atomic<std::uint64_t> non_sync_in_flight_{0};
  std::mutex tap_mu_;
  Tap tap_;
};

}  // namespace nups
