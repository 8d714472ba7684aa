#include "nups/replication/replication_manager.hpp"

#include <algorithm>

#include "nups/runtime/runtime.hpp"
#include "nups/transport/transport.hpp"

namespace nups {

double SyncStats::achieved_frequency_hz() const {
  if (rounds_started < 2 || last_start <= first_start) return 0.0;
  return static_cast<double>(rounds_started - 1) * 1e6 / static_cast<double>((last_start - first_start).count());
}

ReplicationManager::ReplicationManager(NodeEnv env, std::vector<Key> replicated_keys)
    : env_(env), keys_(std::move(replicated_keys)), pattern_(env.cfg.num_nodes) {
  std::sort(keys_.begin(), keys_.end());
}

void ReplicationManager::read_locked(const KeySlot& s, Key k, std::span<Scalar> out) const {
  if (s.technique != Technique::Replicated) {
    throw TechniqueMismatch("key " + std::to_string(k) + " is relocated, not replicated");
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.value[i] + s.in_sync[i] + s.accumulated[i];
}

void ReplicationManager::read(Key k, std::span<Scalar> out) const {
  const KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  read_locked(s, k, out);
}

void ReplicationManager::write_locked(KeySlot& s, Key k, std::span<const Scalar> delta) {
  if (s.technique != Technique::Replicated) {
    throw TechniqueMismatch("key " + std::to_string(k) + " is relocated, not replicated");
  }
  if (std::all_of(delta.begin(), delta.end(), [](Scalar x) { return x == Scalar{0}; })) return;
  if (env_.cfg.clip_enabled) {
    Value d(delta.begin(), delta.end());
    clip_update(d, s.norms, env_.cfg.clip_factor, env_.cfg.clip_smoothing);
    for (std::size_t i = 0; i < d.size(); ++i) s.accumulated[i] += d[i];
  } else {
    for (std::size_t i = 0; i < delta.size(); ++i) s.accumulated[i] += delta[i];
  }
  s.dirty = true;
}

void ReplicationManager::write(Key k, std::span<const Scalar> delta) {
  KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  write_locked(s, k, delta);
}

bool ReplicationManager::round_active() const {
  std::lock_guard lock(mu_);
  return phase_ != Phase::Idle;
}

SyncStats ReplicationManager::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void ReplicationManager::start_round() {
  std::lock_guard lock(mu_);
  if (phase_ != Phase::Idle) throw std::logic_error("replication: round already running");
  partial_.clear();
  for (Key k : keys_) {
    KeySlot& s = env_.store[k];
    std::lock_guard slot_lock(s.latch);
    if (!s.dirty) continue;
    // Swap the accumulator out so writes during the round go to the next one.
    for (std::size_t i = 0; i < s.accumulated.size(); ++i) s.in_sync[i] += s.accumulated[i];
    partial_.emplace(k, s.accumulated);
    std::fill(s.accumulated.begin(), s.accumulated.end(), Scalar{0});
    s.dirty = false;
  }
  round_start_ = env_.runtime.now();
  if (stats_.rounds_started == 0) stats_.first_start = round_start_;
  stats_.last_start = round_start_;
  ++stats_.rounds_started;
  stats_.keys_sent += partial_.size();

  const NodeId me = env_.id;
  if (pattern_.is_extra(me)) {
    send_partial_locked(*pattern_.extra_partner(me), RecursiveDoubling::kFoldStage);
    phase_ = Phase::WaitUnfold;
  } else if (pattern_.extra_partner(me)) {
    phase_ = Phase::WaitFold;
  } else {
    phase_ = Phase::Exchange;
    stage_ = 0;
    if (pattern_.num_stages() > 0) send_partial_locked(pattern_.stage_partner(me, 0), 0);
  }
  progress_locked();
}

void ReplicationManager::send_partial_locked(NodeId to, std::uint32_t stage) {
  Message m;
  m.kind = MessageKind::SyncExchange;
  m.cause = Cause::Sync;
  m.sender = env_.id;
  m.receiver = to;
  m.origin = env_.id;
  m.stage = stage;
  m.request_id = round_;
  m.keys.reserve(partial_.size());
  m.payload.reserve(partial_.size() * env_.cfg.value_dim);
  for (const auto& [k, v] : partial_) {
    m.keys.push_back(k);
    m.payload.insert(m.payload.end(), v.begin(), v.end());
  }
  env_.transport.send(std::move(m));
}

void ReplicationManager::merge_locked(const Message& m) {
  const std::size_t dim = env_.cfg.value_dim;
  for (std::size_t i = 0; i < m.keys.size(); ++i) {
    const Scalar* row = m.payload.data() + i * dim;
    auto [it, fresh] = partial_.try_emplace(m.keys[i]);
    if (fresh) {
      it->second.assign(row, row + dim);
    } else {
      for (std::size_t j = 0; j < dim; ++j) it->second[j] += row[j];
    }
  }
}

void ReplicationManager::handle(Message&& m) {
  if (m.kind != MessageKind::SyncExchange) throw RoutingError("replication: unexpected message kind");
  std::lock_guard lock(mu_);
  const auto key = std::make_pair(m.request_id, m.stage);
  if (m.request_id < round_) throw RoutingError("replication: message for a finished round");
  early_.emplace(key, std::move(m));
  progress_locked();
}

void ReplicationManager::progress_locked() {
  const NodeId me = env_.id;
  while (true) {
    switch (phase_) {
      case Phase::Idle:
        return;
      case Phase::WaitFold: {
        auto it = early_.find({round_, RecursiveDoubling::kFoldStage});
        if (it == early_.end()) return;
        merge_locked(it->second);
        early_.erase(it);
        phase_ = Phase::Exchange;
        stage_ = 0;
        if (pattern_.num_stages() > 0) send_partial_locked(pattern_.stage_partner(me, 0), 0);
        break;
      }
      case Phase::Exchange: {
        if (stage_ == pattern_.num_stages()) {
          if (auto extra = pattern_.extra_partner(me)) send_partial_locked(*extra, RecursiveDoubling::kUnfoldStage);
          finish_locked();
          return;
        }
        auto it = early_.find({round_, stage_});
        if (it == early_.end()) return;
        merge_locked(it->second);
        early_.erase(it);
        ++stage_;
        if (stage_ < pattern_.num_stages()) send_partial_locked(pattern_.stage_partner(me, stage_), stage_);
        break;
      }
      case Phase::WaitUnfold: {
        auto it = early_.find({round_, RecursiveDoubling::kUnfoldStage});
        if (it == early_.end()) return;
        partial_.clear();
        merge_locked(it->second);
        early_.erase(it);
        finish_locked();
        return;
      }
    }
  }
}

void ReplicationManager::finish_locked() {
  for (auto& [k, total] : partial_) {
    KeySlot& s = env_.store[k];
    std::lock_guard slot_lock(s.latch);
    for (std::size_t i = 0; i < total.size(); ++i) s.value[i] += total[i];
    std::fill(s.in_sync.begin(), s.in_sync.end(), Scalar{0});
  }
  partial_.clear();
  const std::uint64_t done = round_;
  phase_ = Phase::Idle;
  ++round_;
  const Micros now = env_.runtime.now();
  stats_.last_end = now;
  stats_.total_round_time += now - round_start_;
  ++stats_.rounds_completed;
  if (round_hook_) round_hook_(done);

  if (scheduled_ && round_ < round_limit_) {
    const Micros interval = env_.cfg.staleness_interval;
    const Micros next = std::max(round_start_ + interval, now);
    arm_timer_locked(next - now);
  }
}

void ReplicationManager::arm_timer_locked(Micros delay) {
  const std::uint64_t gen = generation_;
  env_.runtime.post_after(delay, [this, gen] { on_timer(gen); });
}

void ReplicationManager::on_timer(std::uint64_t generation) {
  {
    std::lock_guard lock(mu_);
    if (generation != generation_) return;
    if (!scheduled_ || round_ >= round_limit_ || phase_ != Phase::Idle) return;
  }
  start_round();
}

void ReplicationManager::start_schedule() {
  std::lock_guard lock(mu_);
  if (keys_.empty() || env_.cfg.staleness_interval == kNever) return;
  scheduled_ = true;
  round_limit_ = UINT64_MAX;
  ++generation_;
  if (phase_ == Phase::Idle) arm_timer_locked(env_.cfg.staleness_interval);
}

void ReplicationManager::stop_schedule_at(std::uint64_t total_rounds) {
  std::lock_guard lock(mu_);
  round_limit_ = total_rounds;
  if (stats_.rounds_started >= round_limit_ && phase_ == Phase::Idle) {
    scheduled_ = false;
    ++generation_;
  }
}

}  // namespace nups
