#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/runtime/signal.hpp"
#include "nups/runtime/task.hpp"
#include "nups/sampling/sampling_manager.hpp"

namespace nups {

class Node;

/// Parameter access for one worker thread. The calls carry no technique
/// information: each key is routed to the technique it was assigned.
class WorkerContext {
 public:
  WorkerContext(Node& node, SamplingManager& sampling, std::uint32_t worker_index, std::uint64_t seed);

  NodeId node_id() const;
  std::uint32_t worker_index() const { return worker_index_; }
  Node& node() { return node_; }
  Runtime& runtime();
  std::mt19937_64& rng() { return rng_; }

  /// Current values of `keys`, one row per key in request order.
  Task<ValueBlock> pull(std::vector<Key> keys, Cause cause = Cause::Direct);
  /// Adds row i of `deltas` to keys[i]. Returns without waiting for remote keys.
  void push(std::span<const Key> keys, const ValueBlock& deltas, Cause cause = Cause::Direct);
  void push(Key key, std::span<const Scalar> delta, Cause cause = Cause::Direct);
  /// Declares upcoming accesses: relocated keys start moving to this node.
  void localize_hint(std::span<const Key> keys);

  SampleHandle prepare_sample(DistributionId dist, std::size_t n);
  Task<SampleBatch> pull_sample(SampleHandle& h, std::size_t n);
  /// Pulls everything left in the handle.
  Task<SampleBatch> pull_sample(SampleHandle& h);

  /// Models computation time under the simulator; a no-op otherwise.
  auto compute(Micros cost) { return sleep_for(runtime(), cost); }

 private:
  Node& node_;
  SamplingManager& sampling_;
  std::uint32_t worker_index_;
  std::mt19937_64 rng_;
};

}  // namespace nups
