#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/core/types.hpp"
#include "nups/replication/clipping.hpp"

namespace nups {

class Runtime;
class Transport;

/// An operation on a relocated key that reached a node which is about to
/// become the owner (its grant is still in flight).
struct QueuedOp {
  enum class Kind : std::uint8_t { Pull, Push, Transfer };
  Kind kind = Kind::Pull;
  NodeId origin = 0;  // requester; new owner for Transfer
  std::uint64_t request_id = 0;
  Cause cause = Cause::Direct;
  Value delta;
};

/// A remote operation issued by this node. Answers are handed to the caller
/// in issue order, so a node never observes a key's versions going backwards.
struct IssuedOp {
  std::uint64_t request_id = 0;
  std::function<void(std::span<const Scalar>, std::uint64_t)> done;
  bool answered = false;
  Value value;
  std::uint64_t version = 0;
};

/// Everything a node knows about one key, behind a single latch. The same
/// latch covers the technique check, the local-allocation check and the value.
struct KeySlot {
  mutable std::mutex latch;
  Technique technique = Technique::Relocated;
  Value value;
  std::uint64_t version = 0;

  // Relocated keys.
  bool owned = false;
  bool localize_pending = false;
  NodeId directory_owner = 0;  // authoritative at the home node only
  std::optional<NodeId> owner_hint;
  std::deque<IssuedOp> issued;                // remote ops issued here, not yet completed
  std::optional<std::uint64_t> hinted_request;  // issued op sent straight to owner_hint
  std::deque<QueuedOp> deferred;              // issued while the hinted op is in flight
  std::deque<QueuedOp> waiting;
  std::vector<std::function<void()>> on_localized;

  // Replicated keys: read view is value + in_sync + accumulated.
  Value accumulated;
  Value in_sync;  // contribution handed to the running sync round
  bool dirty = false;
  NormTracker norms;
};

/// Per-key slots of one node, indexed by the dense key id.
class LocalStore {
 public:
  explicit LocalStore(std::uint64_t num_keys) : slots_(num_keys) {}
  KeySlot& operator[](Key k) { return slots_[k]; }
  const KeySlot& operator[](Key k) const { return slots_[k]; }
  std::uint64_t size() const { return slots_.size(); }

 private:
  std::vector<KeySlot> slots_;
};

/// Plumbing shared by the managers of one node.
struct NodeEnv {
  NodeId id;
  const ClusterConfig& cfg;
  const std::vector<Technique>& techniques;
  Runtime& runtime;
  Transport& transport;
  LocalStore& store;
};

}  // namespace nups
