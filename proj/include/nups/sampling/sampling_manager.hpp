#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/runtime/task.hpp"
#include "nups/sampling/distribution.hpp"
#include "nups/sampling/pool.hpp"

namespace nups {

class Node;

using DistributionId = std::uint32_t;

/// A request for N samples. Obtained from prepare_sample and drained by
/// pull_sample in any number of partial pulls.
class SampleHandle {
 public:
  SampleHandle() = default;

  DistributionId distribution() const { return dist_; }
  std::size_t size() const { return total_; }
  std::size_t remaining() const { return total_ - delivered_; }
  /// Keys fixed at preparation time, in reservation order. Empty for schemes
  /// that draw at pull time.
  const std::vector<Key>& prepared_keys() const { return prepared_; }
  std::uint64_t postponements() const { return postponements_; }

 private:
  friend class SamplingManager;
  struct Entry {
    Key key;
    bool postponed = false;
  };
  DistributionId dist_ = 0;
  std::size_t total_ = 0;
  std::size_t delivered_ = 0;
  std::deque<Entry> queue_;
  std::vector<Key> prepared_;
  std::uint64_t postponements_ = 0;
};

struct SampleBatch {
  std::vector<Key> keys;
  ValueBlock values;
};

struct SamplingStats {
  std::uint64_t prepared = 0;
  std::uint64_t delivered = 0;
  std::uint64_t remote_reads = 0;
  std::uint64_t postponed = 0;
  std::uint64_t pools_created = 0;
  std::uint64_t pools_on_demand = 0;
  std::uint64_t local_fallbacks = 0;

  SamplingStats& operator+=(const SamplingStats& o);
};

struct SamplingOptions {
  /// Trailing window for the consumption-rate estimate.
  Micros rate_window{100'000};
  /// Draws from pi tried before scanning the local support (local sampling).
  std::uint32_t local_rejection_tries = 64;
  /// Sees every pool a node creates: (node, distribution, fresh draws, sample sequence).
  std::function<void(NodeId, DistributionId, const std::vector<Key>&, const std::vector<Key>&)> pool_observer;
};

/// Per-node sampling access. Picks a scheme per distribution from its
/// conformity level and turns sample requests into key accesses that hit
/// local parameters as often as the level allows.
class SamplingManager {
 public:
  SamplingManager(Node& node, std::uint64_t seed, SamplingOptions options = {});

  /// Registers `dist` under `id`. Pooled schemes create their first pool now.
  void register_distribution(DistributionId id, std::shared_ptr<const TargetDistribution> dist);

  SchemeChoice scheme(DistributionId id) const;
  const TargetDistribution& distribution(DistributionId id) const;

  /// Reserves n samples and starts localizing the ones that are not local.
  /// `rng` is the calling worker's stream.
  SampleHandle prepare_sample(DistributionId id, std::size_t n, std::mt19937_64& rng);

  /// Delivers the next n samples of `h` with their current values.
  Task<SampleBatch> pull_sample(SampleHandle& h, std::size_t n, std::mt19937_64& rng);

  SamplingStats stats() const;

 private:
  struct State {
    std::shared_ptr<const TargetDistribution> dist;
    SchemeChoice choice;
    std::mutex mu;
    std::unique_ptr<PoolStream> stream;
    RelocationTimeEstimator estimator;
    ConsumptionRate rate;
    explicit State(Micros window) : rate(window) {}
  };

  State& state(DistributionId id) const;
  void start_pool_locked(State& st);
  void maybe_fill(State& st);
  void localize_missing(const std::vector<Key>& keys);
  Key draw_local(const TargetDistribution& dist, std::mt19937_64& rng);

  Node& node_;
  std::uint64_t seed_;
  SamplingOptions options_;
  std::map<DistributionId, std::unique_ptr<State>> states_;

  mutable std::mutex stats_mu_;
  SamplingStats stats_;
};

}  // namespace nups
