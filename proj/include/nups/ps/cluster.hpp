#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/ps/node.hpp"
#include "nups/ps/worker.hpp"
#include "nups/runtime/simulator.hpp"
#include "nups/sampling/sampling_manager.hpp"
#include "nups/transport/transport.hpp"

namespace nups {

enum class TransportKind { Simulated, Tcp };

struct ClusterOptions {
  ClusterConfig config;
  TransportKind transport = TransportKind::Simulated;
  NetworkModel network;
  /// One entry per key; empty means every key is relocated.
  std::vector<Technique> techniques;
  Initializer init;
  SamplingOptions sampling;
};

/// Q nodes with W workers each, their runtime and transport. Under the
/// simulated transport everything runs on a deterministic virtual clock;
/// under TCP all nodes live in this process and talk over loopback sockets.
class Cluster {
 public:
  explicit Cluster(ClusterOptions options);
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const ClusterConfig& config() const { return cfg_; }
  std::uint32_t num_nodes() const { return cfg_.num_nodes; }
  const std::vector<Technique>& techniques() const { return techniques_; }
  bool simulated() const { return sim_ != nullptr; }

  Runtime& runtime() { return *runtime_; }
  /// Null under the TCP transport.
  Simulator* simulator() { return sim_; }
  Transport& transport() { return *transport_; }
  Node& node(NodeId q) { return *nodes_.at(q); }
  const Node& node(NodeId q) const { return *nodes_.at(q); }
  SamplingManager& sampling(NodeId q) { return *sampling_.at(q); }
  WorkerContext& worker(NodeId q, std::uint32_t w) { return *workers_.at(q * cfg_.workers_per_node + w); }
  std::size_t num_workers() const { return workers_.size(); }
  WorkerContext& worker(std::size_t global_index) { return *workers_.at(global_index); }

  /// Registers `dist` with every node.
  DistributionId register_distribution(TargetDistribution dist);

  /// Runs `body` once per worker, all concurrently, and waits for all of them.
  /// Rethrows the first worker exception.
  void run_workers(const std::function<Task<void>(WorkerContext&)>& body);

  /// Drives the cluster until `done()` holds. Throws if `timeout` (virtual
  /// time under the simulator) passes first.
  void run_until(const std::function<bool()>& done, Micros timeout = Micros{3'600'000'000});

  /// Waits until no request or relocation message is in flight and no node
  /// waits for an answer. Scheduled sync rounds keep running.
  void quiesce();

  /// Periodic replica synchronization at the configured staleness interval.
  void start_sync();
  /// Stops periodic synchronization after letting started rounds finish.
  void stop_sync();
  /// One synchronous round on all nodes, so that all replicas agree.
  void flush_sync();
  bool sync_enabled() const;

  /// The value a reader on `viewer` would see: the owner's copy of a
  /// relocated key, or the viewer's replica. Call when quiescent.
  Value model_value(Key k, NodeId viewer = 0) const;

  MessageStats message_stats() const { return transport_->stats(); }
  SyncStats sync_stats() const;
  SamplingStats sampling_stats() const;

 private:
  ClusterConfig cfg_;
  std::vector<Technique> techniques_;
  std::unique_ptr<Runtime> runtime_;
  Simulator* sim_ = nullptr;
  std::unique_ptr<Transport> transport_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<SamplingManager>> sampling_;
  std::vector<std::unique_ptr<WorkerContext>> workers_;
  DistributionId next_distribution_ = 0;
};

}  // namespace nups
