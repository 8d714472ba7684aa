#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/sampling/distribution.hpp"

namespace nups {

/// True when the unused samples would run out before a pool started now
/// could be localized, with a safety factor of 2.
bool should_prepare_pool(double unused_samples, double est_relocation_seconds, double consumption_per_second);

/// Mean of the most recent pool localization times.
class RelocationTimeEstimator {
 public:
  explicit RelocationTimeEstimator(std::size_t window = 8) : window_(window) {}
  void record(Micros d);
  bool has_estimate() const { return !recent_.empty(); }
  double seconds() const;

 private:
  std::size_t window_;
  std::deque<Micros> recent_;
};

/// Samples consumed per second over a trailing time window.
class ConsumptionRate {
 public:
  explicit ConsumptionRate(Micros window) : window_(window) {}
  void record(Micros now, std::size_t samples);
  double per_second(Micros now);

 private:
  void expire(Micros now);
  Micros window_;
  std::deque<std::pair<Micros, std::size_t>> events_;
  std::size_t in_window_ = 0;
};

/// Sample stream of pooled reuse: each pool holds G independent draws from pi
/// and contributes U random permutations of them, so every pooled key is used
/// exactly U times, spread over the pool's U * G samples.
class PoolStream {
 public:
  PoolStream(std::uint32_t pool_size, std::uint32_t use_frequency, std::uint64_t seed);

  /// Draws a new pool and appends its samples to the stream. Returns its keys.
  const std::vector<Key>& add_pool(const TargetDistribution& dist);
  /// Same with the G fresh draws supplied by the caller.
  const std::vector<Key>& add_pool_from(std::vector<Key> fresh);

  /// Reserves the next n samples, creating pools when the stream runs dry.
  /// `created` counts the pools made on demand.
  std::vector<Key> take(std::size_t n, const TargetDistribution& dist, std::size_t* created = nullptr);

  /// Called with each new pool's fresh draws and its U * G sample sequence.
  using PoolObserver = std::function<void(const std::vector<Key>&, const std::vector<Key>&)>;
  void set_observer(PoolObserver observer) { observer_ = std::move(observer); }

  std::size_t unused() const { return unused_; }
  std::uint64_t pools_created() const { return pools_created_; }
  std::uint32_t pool_size() const { return g_; }
  std::uint32_t use_frequency() const { return u_; }

 private:
  struct Pool {
    std::vector<Key> keys;
    std::vector<Key> sequence;
    std::size_t next = 0;
  };
  std::uint32_t g_;
  std::uint32_t u_;
  std::mt19937_64 rng_;
  std::deque<Pool> pools_;
  std::size_t unused_ = 0;
  std::uint64_t pools_created_ = 0;
  PoolObserver observer_;
};

}  // namespace nups
