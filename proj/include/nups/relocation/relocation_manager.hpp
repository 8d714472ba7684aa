#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>

#include "nups/ps/store.hpp"
#include "nups/transport/message.hpp"

namespace nups {

/// Dynamic allocation of relocated keys (one node-local copy per key, moved on
/// demand). The home node of a key keeps a directory entry naming the current
/// owner and is the serialization point for ownership changes: a localize goes
/// requester -> home -> old owner -> requester, remote reads and writes go to
/// the home node, which forwards them to the owner.
///
/// Methods ending in `_locked` expect the caller to hold the key's latch.
class RelocationManager {
 public:
  /// Completion of a remote read: the value and its version.
  using ReadDone = std::function<void(std::span<const Scalar>, std::uint64_t)>;
  /// Observes every version a key takes on at its owner.
  using VersionHook = std::function<void(Key, std::uint64_t, std::span<const Scalar>)>;

  explicit RelocationManager(NodeEnv env) : env_(env) {}

  /// Reads `k` into `out` if it is local and returns true. Otherwise issues a
  /// remote read, returns false, and calls `done` once the value arrives.
  bool read_locked(KeySlot& s, Key k, std::span<Scalar> out, Cause cause, ReadDone done,
                   std::uint64_t* version = nullptr);
  bool read(Key k, std::span<Scalar> out, Cause cause, ReadDone done, std::uint64_t* version = nullptr);

  /// Adds `delta` to `k`. Remote writes are asynchronous; later operations
  /// of this node on `k` still observe them.
  void write_locked(KeySlot& s, Key k, std::span<const Scalar> delta, Cause cause);
  void write(Key k, std::span<const Scalar> delta, Cause cause);

  /// Starts moving `k` to this node. `done` (optional) runs through the
  /// runtime once the key is local, immediately-posted if it already is.
  void localize_locked(KeySlot& s, Key k, Cause cause, std::function<void()> done = {});
  void localize(Key k, Cause cause, std::function<void()> done = {});

  /// Localizes all keys, `done` runs once every one of them has arrived.
  void localize_all(std::span<const Key> keys, Cause cause, std::function<void()> done = {});

  static bool is_local_locked(const KeySlot& s) { return s.owned && s.issued.empty(); }
  bool is_local(Key k) const;
  /// Directory entry for `k`; only meaningful on its home node.
  NodeId directory_owner(Key k) const;

  void handle(Message&& m);

  /// Remote operations issued here that are not answered yet.
  std::uint64_t outstanding() const { return outstanding_.load(); }

  void set_version_hook(VersionHook hook) { version_hook_ = std::move(hook); }

 private:
  using Completion = std::function<void(std::span<const Scalar>, std::uint64_t)>;

  NodeId home_of(Key k) const;
  void issue_locked(KeySlot& s, Key k, QueuedOp op, Completion done);
  void route_locked(KeySlot& s, Key k, QueuedOp op, bool allow_hint);
  void serve_locked(KeySlot& s, Key k, QueuedOp op, NodeId from);
  void apply_locked(KeySlot& s, Key k, QueuedOp&& op);
  void forward(NodeId to, Key k, const QueuedOp& op);
  void home_localize_locked(KeySlot& s, Key k, NodeId requester, Cause cause);
  void finish_locked(KeySlot& s, Key k, std::uint64_t request_id, NodeId responder, std::span<const Scalar> value,
                     std::uint64_t version);
  void on_grant(Message&& m);
  void send(Message m);
  void observe(Key k, const KeySlot& s) const;

  NodeEnv env_;
  std::atomic<std::uint64_t> next_request_{1};
  std::atomic<std::uint64_t> outstanding_{0};
  VersionHook version_hook_;
};

}  // namespace nups
