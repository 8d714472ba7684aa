#include "nups/sampling/sampling_manager.hpp"

#include <algorithm>

#include "nups/ps/node.hpp"
#include "nups/runtime/signal.hpp"

namespace nups {

SamplingStats& SamplingStats::operator+=(const SamplingStats& o) {
  prepared += o.prepared;
  delivered += o.delivered;
  remote_reads += o.remote_reads;
  postponed += o.postponed;
  pools_created += o.pools_created;
  pools_on_demand += o.pools_on_demand;
  local_fallbacks += o.local_fallbacks;
  return *this;
}

SamplingManager::SamplingManager(Node& node, std::uint64_t seed, SamplingOptions options)
    : node_(node), seed_(seed), options_(options) {}

SamplingManager::State& SamplingManager::state(DistributionId id) const {
  auto it = states_.find(id);
  if (it == states_.end()) throw InvalidInput("unknown distribution " + std::to_string(id));
  return *it->second;
}

SchemeChoice SamplingManager::scheme(DistributionId id) const { return state(id).choice; }

const TargetDistribution& SamplingManager::distribution(DistributionId id) const { return *state(id).dist; }

SamplingStats SamplingManager::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void SamplingManager::register_distribution(DistributionId id, std::shared_ptr<const TargetDistribution> dist) {
  const auto& cfg = node_.config();
  for (Key k : dist->support()) {
    if (k >= cfg.num_keys) throw InvalidInput("distribution support exceeds the key space");
  }
  if (states_.count(id)) throw InvalidInput("distribution " + std::to_string(id) + " already registered");
  auto st = std::make_unique<State>(options_.rate_window);
  st->dist = std::move(dist);
  st->choice = choose_scheme(st->dist->level(), cfg.pool_size, cfg.use_frequency);
  State& ref = *st;
  states_.emplace(id, std::move(st));
  if (ref.choice.kind == SchemeKind::PooledReuse || ref.choice.kind == SchemeKind::PooledReusePostponing) {
    // Streams differ per node and per distribution.
    const std::uint64_t stream_seed = seed_ ^ (0x9e3779b97f4a7c15ull * (std::uint64_t{id} + 1));
    ref.stream = std::make_unique<PoolStream>(ref.choice.pool_size, cfg.use_frequency, stream_seed);
    if (options_.pool_observer) {
      ref.stream->set_observer([this, id](const std::vector<Key>& fresh, const std::vector<Key>& seq) {
        options_.pool_observer(node_.id(), id, fresh, seq);
      });
    }
    std::lock_guard lock(ref.mu);
    start_pool_locked(ref);
  }
}

void SamplingManager::start_pool_locked(State& st) {
  const std::vector<Key> keys = st.stream->add_pool(*st.dist);
  {
    std::lock_guard lock(stats_mu_);
    ++stats_.pools_created;
  }
  const Micros started = node_.runtime().now();
  std::vector<Key> missing;
  for (Key k : keys) {
    if (!node_.is_local(k)) missing.push_back(k);
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  State* sp = &st;
  node_.relocation().localize_all(missing, Cause::Sampling, [this, sp, started] {
    {
      std::lock_guard lock(sp->mu);
      sp->estimator.record(node_.runtime().now() - started);
    }
    maybe_fill(*sp);
  });
}

void SamplingManager::maybe_fill(State& st) {
  std::lock_guard lock(st.mu);
  if (!st.estimator.has_estimate()) return;
  const double rate = st.rate.per_second(node_.runtime().now());
  // One pool per trigger; the next check happens when it has been localized.
  if (should_prepare_pool(static_cast<double>(st.stream->unused()), st.estimator.seconds(), rate)) {
    start_pool_locked(st);
  }
}

void SamplingManager::localize_missing(const std::vector<Key>& keys) {
  for (Key k : keys) {
    if (node_.technique(k) == Technique::Relocated && !node_.is_local(k)) node_.localize(k, Cause::Sampling);
  }
}

SampleHandle SamplingManager::prepare_sample(DistributionId id, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw InvalidInput("prepare_sample needs a positive sample count");
  State& st = state(id);
  SampleHandle h;
  h.dist_ = id;
  h.total_ = n;
  std::size_t on_demand = 0;
  switch (st.choice.kind) {
    case SchemeKind::Independent:
      h.prepared_.reserve(n);
      for (std::size_t i = 0; i < n; ++i) h.prepared_.push_back(st.dist->draw(rng));
      break;
    case SchemeKind::PooledReuse:
    case SchemeKind::PooledReusePostponing: {
      std::lock_guard lock(st.mu);
      h.prepared_ = st.stream->take(n, *st.dist, &on_demand);
      st.rate.record(node_.runtime().now(), n);
      break;
    }
    case SchemeKind::Local:
      break;
  }
  for (Key k : h.prepared_) h.queue_.push_back({k, false});
  localize_missing(h.prepared_);
  {
    std::lock_guard lock(stats_mu_);
    stats_.prepared += n;
    stats_.pools_on_demand += on_demand;
    stats_.pools_created += on_demand;
  }
  if (st.stream) maybe_fill(st);
  return h;
}

Key SamplingManager::draw_local(const TargetDistribution& dist, std::mt19937_64& rng) {
  for (std::uint32_t t = 0; t < options_.local_rejection_tries; ++t) {
    const Key k = dist.draw(rng);
    if (node_.is_local(k)) return k;
  }
  // Rare keys dominate the draws: restrict pi to the local support directly.
  const auto& support = dist.support();
  const auto& probs = dist.probabilities();
  std::vector<std::size_t> local;
  double mass = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (node_.is_local(support[i])) {
      local.push_back(i);
      mass += probs[i];
    }
  }
  if (!local.empty() && mass > 0.0) {
    double u = std::uniform_real_distribution<double>(0.0, mass)(rng);
    for (std::size_t i : local) {
      u -= probs[i];
      if (u < 0.0) return support[i];
    }
    return support[local.back()];
  }
  {
    std::lock_guard lock(stats_mu_);
    ++stats_.local_fallbacks;
  }
  return dist.draw(rng);
}

Task<SampleBatch> SamplingManager::pull_sample(SampleHandle& h, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw InvalidInput("pull_sample needs a positive sample count");
  if (n > h.remaining()) {
    throw ExhaustedHandle("pull_sample of " + std::to_string(n) + " from a handle with " +
                          std::to_string(h.remaining()) + " samples left");
  }
  State& st = state(h.dist_);
  const std::size_t dim = node_.config().value_dim;
  SampleBatch batch;
  batch.keys.reserve(n);
  batch.values = ValueBlock(n, dim);
  auto signal = std::make_shared<Signal>(node_.runtime());
  std::uint64_t remote = 0;
  std::uint64_t postponed = 0;

  auto read_any = [&](Key k) {
    const std::size_t i = batch.keys.size();
    batch.keys.push_back(k);
    signal->expect();
    ValueBlock* out = &batch.values;
    const bool local = node_.read(k, out->row(i), Cause::Sampling, [signal, out, i](std::span<const Scalar> v, std::uint64_t) {
      std::copy(v.begin(), v.end(), out->row(i).begin());
      signal->arrive();
    });
    if (local) {
      signal->arrive();
    } else {
      ++remote;
    }
  };

  switch (st.choice.kind) {
    case SchemeKind::Independent:
    case SchemeKind::PooledReuse:
      for (std::size_t j = 0; j < n; ++j) {
        const Key k = h.queue_.front().key;
        h.queue_.pop_front();
        read_any(k);
      }
      break;
    case SchemeKind::PooledReusePostponing:
      while (batch.keys.size() < n) {
        SampleHandle::Entry e = h.queue_.front();
        h.queue_.pop_front();
        const std::size_t i = batch.keys.size();
        if (node_.try_read_local(e.key, batch.values.row(i), Cause::Sampling)) {
          batch.keys.push_back(e.key);
        } else if (!e.postponed) {
          // Not here yet: swap it with a later sample of this handle.
          e.postponed = true;
          h.queue_.push_back(e);
          ++postponed;
          if (node_.technique(e.key) == Technique::Relocated) node_.localize(e.key, Cause::Sampling);
        } else {
          read_any(e.key);
        }
      }
      break;
    case SchemeKind::Local:
      for (std::size_t j = 0; j < n; ++j) read_any(draw_local(*st.dist, rng));
      break;
  }
  h.delivered_ += n;
  h.postponements_ += postponed;
  {
    std::lock_guard lock(stats_mu_);
    stats_.delivered += n;
    stats_.remote_reads += remote;
    stats_.postponed += postponed;
  }
  co_await signal->wait();
  co_return batch;
}

}  // namespace nups
