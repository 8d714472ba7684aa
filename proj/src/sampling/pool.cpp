#include "nups/sampling/pool.hpp"

#include <algorithm>

namespace nups {

bool should_prepare_pool(double unused_samples, double est_relocation_seconds, double consumption_per_second) {
  return unused_samples < 2.0 * est_relocation_seconds * consumption_per_second;
}

void RelocationTimeEstimator::record(Micros d) {
  recent_.push_back(d);
  if (recent_.size() > window_) recent_.pop_front();
}

double RelocationTimeEstimator::seconds() const {
  if (recent_.empty()) return 0.0;
  double total = 0.0;
  for (auto d : recent_) total += static_cast<double>(d.count());
  return total / static_cast<double>(recent_.size()) / 1e6;
}

void ConsumptionRate::expire(Micros now) {
  while (!events_.empty() && events_.front().first + window_ < now) {
    in_window_ -= events_.front().second;
    events_.pop_front();
  }
}

void ConsumptionRate::record(Micros now, std::size_t samples) {
  expire(now);
  events_.emplace_back(now, samples);
  in_window_ += samples;
}

double ConsumptionRate::per_second(Micros now) {
  expire(now);
  return static_cast<double>(in_window_) * 1e6 / static_cast<double>(window_.count());
}

PoolStream::PoolStream(std::uint32_t pool_size, std::uint32_t use_frequency, std::uint64_t seed)
    : g_(pool_size), u_(use_frequency), rng_(seed) {
  if (pool_size == 0 || use_frequency == 0) throw InvalidInput("pool size and use frequency must be positive");
}

const std::vector<Key>& PoolStream::add_pool(const TargetDistribution& dist) {
  std::vector<Key> fresh;
  fresh.reserve(g_);
  for (std::uint32_t i = 0; i < g_; ++i) fresh.push_back(dist.draw(rng_));
  return add_pool_from(std::move(fresh));
}

const std::vector<Key>& PoolStream::add_pool_from(std::vector<Key> fresh) {
  if (fresh.size() != g_) throw InvalidInput("pool needs exactly G fresh draws");
  Pool pool;
  pool.keys = std::move(fresh);
  pool.sequence.reserve(std::size_t{g_} * u_);
  std::vector<Key> perm = pool.keys;
  for (std::uint32_t u = 0; u < u_; ++u) {
    std::shuffle(perm.begin(), perm.end(), rng_);
    pool.sequence.insert(pool.sequence.end(), perm.begin(), perm.end());
  }
  unused_ += pool.sequence.size();
  ++pools_created_;
  if (observer_) observer_(pool.keys, pool.sequence);
  pools_.push_back(std::move(pool));
  return pools_.back().keys;
}

std::vector<Key> PoolStream::take(std::size_t n, const TargetDistribution& dist, std::size_t* created) {
  std::vector<Key> out;
  out.reserve(n);
  while (out.size() < n) {
    if (pools_.empty()) {
      add_pool(dist);
      if (created) ++*created;
    }
    Pool& p = pools_.front();
    const std::size_t take = std::min(n - out.size(), p.sequence.size() - p.next);
    out.insert(out.end(), p.sequence.begin() + static_cast<std::ptrdiff_t>(p.next),
               p.sequence.begin() + static_cast<std::ptrdiff_t>(p.next + take));
    p.next += take;
    unused_ -= take;
    if (p.next == p.sequence.size()) pools_.pop_front();
  }
  return out;
}

}  // namespace nups
