#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <string_view>
#include <vector>

#include "nups/core/types.hpp"

namespace nups {

enum class MessageKind : std::uint8_t {
  PullReq,
  PullResp,
  PushReq,
  PushAck,
  LocalizeReq,
  LocalizeForward,
  LocalizeGrant,
  SyncExchange,
};

inline constexpr std::size_t kNumMessageKinds = 8;

std::string_view to_string(MessageKind k);

/// Typed envelope for all inter-node traffic.
///
/// `origin` is the node that issued a request; it stays fixed while the request
/// is forwarded (for LocalizeForward it names the new owner). `payload` is either
/// empty or holds keys.size() rows of the model's value_dim scalars.
struct Message {
  MessageKind kind = MessageKind::PullReq;
  Cause cause = Cause::Direct;
  NodeId sender = 0;
  NodeId receiver = 0;
  NodeId origin = 0;
  std::uint32_t stage = 0;
  std::uint64_t request_id = 0;
  std::vector<Key> keys;
  std::vector<std::uint64_t> versions;
  std::vector<Scalar> payload;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Snapshot of message counters. Subtract two snapshots for per-epoch deltas.
struct MessageStats {
  std::array<std::uint64_t, kNumMessageKinds> by_kind{};
  std::array<std::uint64_t, kNumCauses> by_cause{};
  std::uint64_t total = 0;
  std::uint64_t payload_bytes = 0;

  std::uint64_t kind(MessageKind k) const { return by_kind[static_cast<std::size_t>(k)]; }
  std::uint64_t cause(Cause c) const { return by_cause[static_cast<std::size_t>(c)]; }

  MessageStats operator-(const MessageStats& o) const;
  MessageStats& operator+=(const MessageStats& o);
};

/// Lock-free monotone counters, safe to bump from any thread.
class MessageCounters {
 public:
  void count(const Message& m);
  MessageStats snapshot() const;

 private:
  std::array<std::atomic<std::uint64_t>, kNumMessageKinds> by_kind_{};
  std::array<std::atomic<std::uint64_t>, kNumCauses> by_cause_{};
  std::atomic<std::uint64_t> total_{0};
  std::atomic<std::uint64_t> payload_bytes_{0};
};

}  // namespace nups
