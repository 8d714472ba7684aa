#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nups/ps/store.hpp"
#include "nups/relocation/relocation_manager.hpp"
#include "nups/replication/replication_manager.hpp"
#include "nups/runtime/runtime.hpp"

namespace nups {

/// Initial value of a key. Must be a pure function of the key so that all
/// replicas start identical.
using Initializer = std::function<Value(Key)>;

/// Per-key access counts split by whether they came from the sampling API.
struct AccessCounts {
  std::vector<std::uint64_t> direct;
  std::vector<std::uint64_t> sampling;
};

/// One server node: key slots, both management techniques and the message
/// dispatcher. Workers reach it through WorkerContext.
class Node {
 public:
  Node(NodeId id, const ClusterConfig& cfg, const std::vector<Technique>& techniques, Runtime& runtime,
       Transport& transport, const Initializer& init);

  NodeId id() const { return id_; }
  const ClusterConfig& config() const { return cfg_; }
  Technique technique(Key k) const { return techniques_.at(k); }
  Runtime& runtime() { return runtime_; }
  Transport& transport() { return transport_; }
  RelocationManager& relocation() { return relocation_; }
  ReplicationManager& replication() { return replication_; }
  const ReplicationManager& replication() const { return replication_; }

  /// Reads `k` into `out`. Returns true when served locally; otherwise `done`
  /// fires once the remote value arrived. Technique check and locality check
  /// happen under one acquisition of the key latch.
  bool read(Key k, std::span<Scalar> out, Cause cause, RelocationManager::ReadDone done);
  /// Reads `k` only if it is local; never issues a remote operation.
  bool try_read_local(Key k, std::span<Scalar> out, Cause cause);
  void write(Key k, std::span<const Scalar> delta, Cause cause);
  /// Relocated keys start moving here; replicated keys are already local.
  void localize(Key k, Cause cause, std::function<void()> done = {});
  /// Replicated keys are always local.
  bool is_local(Key k) const;

  void handle(Message&& m);

  /// Current local state of `k`: the replica view, or the value of a
  /// relocated key this node owns. Bypasses the protocol; for evaluation and tests.
  std::optional<Value> inspect(Key k) const;
  bool owns(Key k) const;

  /// No remote operation of this node is pending and no sync round is running.
  bool quiescent() const;

  AccessCounts access_counts() const;
  void reset_access_counts();

 private:
  void check_key(Key k) const;
  void count_access(Key k, Cause cause);

  NodeId id_;
  const ClusterConfig& cfg_;
  const std::vector<Technique>& techniques_;
  Runtime& runtime_;
  Transport& transport_;
  LocalStore store_;
  RelocationManager relocation_;
  ReplicationManager replication_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> direct_hits_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> sampling_hits_;
};

}  // namespace nups
