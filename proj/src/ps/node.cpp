#include "nups/ps/node.hpp"

#include <algorithm>

#include "nups/core/techniques.hpp"

namespace nups {
namespace {

std::vector<Key> replicated_keys(const std::vector<Technique>& techniques) {
  std::vector<Key> keys;
  for (Key k = 0; k < techniques.size(); ++k) {
    if (techniques[k] == Technique::Replicated) keys.push_back(k);
  }
  return keys;
}

}  // namespace

Node::Node(NodeId id, const ClusterConfig& cfg, const std::vector<Technique>& techniques, Runtime& runtime,
           Transport& transport, const Initializer& init)
    : id_(id),
      cfg_(cfg),
      techniques_(techniques),
      runtime_(runtime),
      transport_(transport),
      store_(cfg.num_keys),
      relocation_(NodeEnv{id, cfg, techniques, runtime, transport, store_}),
      replication_(NodeEnv{id, cfg, techniques, runtime, transport, store_}, replicated_keys(techniques)),
      direct_hits_(new std::atomic<std::uint64_t>[cfg.num_keys]),
      sampling_hits_(new std::atomic<std::uint64_t>[cfg.num_keys]) {
  if (techniques.size() != cfg.num_keys) throw InvalidInput("technique vector does not cover all keys");
  const Value zeros(cfg.value_dim, Scalar{0});
  for (Key k = 0; k < cfg.num_keys; ++k) {
    KeySlot& s = store_[k];
    s.technique = techniques[k];
    direct_hits_[k] = 0;
    sampling_hits_[k] = 0;
    if (s.technique == Technique::Replicated) {
      s.value = init ? init(k) : zeros;
      s.accumulated = zeros;
      s.in_sync = zeros;
    } else {
      const NodeId home = home_node_of(k, cfg);
      s.directory_owner = home;
      s.owned = home == id;
      s.value = s.owned && init ? init(k) : zeros;
    }
    if (s.value.size() != cfg.value_dim) throw InvalidInput("initializer returned a value of the wrong width");
  }
}

void Node::check_key(Key k) const {
  if (k >= cfg_.num_keys) throw InvalidInput("key " + std::to_string(k) + " out of range");
}

void Node::count_access(Key k, Cause cause) {
  auto& hits = cause == Cause::Sampling ? sampling_hits_ : direct_hits_;
  hits[k].fetch_add(1, std::memory_order_relaxed);
}

bool Node::read(Key k, std::span<Scalar> out, Cause cause, RelocationManager::ReadDone done) {
  check_key(k);
  count_access(k, cause);
  KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  if (s.technique == Technique::Replicated) {
    replication_.read_locked(s, k, out);
    return true;
  }
  return relocation_.read_locked(s, k, out, cause, std::move(done));
}

bool Node::try_read_local(Key k, std::span<Scalar> out, Cause cause) {
  check_key(k);
  KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  if (s.technique == Technique::Replicated) {
    replication_.read_locked(s, k, out);
  } else if (RelocationManager::is_local_locked(s)) {
    std::copy(s.value.begin(), s.value.end(), out.begin());
  } else {
    return false;
  }
  count_access(k, cause);
  return true;
}

void Node::write(Key k, std::span<const Scalar> delta, Cause cause) {
  check_key(k);
  if (delta.size() != cfg_.value_dim) throw InvalidInput("update width does not match value_dim");
  count_access(k, cause);
  KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  if (s.technique == Technique::Replicated) {
    replication_.write_locked(s, k, delta);
  } else {
    relocation_.write_locked(s, k, delta, cause);
  }
}

void Node::localize(Key k, Cause cause, std::function<void()> done) {
  check_key(k);
  KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  if (s.technique == Technique::Replicated) {
    if (done) runtime_.post(std::move(done));
    return;
  }
  relocation_.localize_locked(s, k, cause, std::move(done));
}

bool Node::is_local(Key k) const {
  check_key(k);
  const KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  return s.technique == Technique::Replicated || RelocationManager::is_local_locked(s);
}

void Node::handle(Message&& m) {
  if (m.kind == MessageKind::SyncExchange) {
    replication_.handle(std::move(m));
  } else {
    relocation_.handle(std::move(m));
  }
}

std::optional<Value> Node::inspect(Key k) const {
  check_key(k);
  const KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  if (s.technique == Technique::Replicated) {
    Value v(cfg_.value_dim);
    replication_.read_locked(s, k, v);
    return v;
  }
  if (!s.owned) return std::nullopt;
  return s.value;
}

bool Node::owns(Key k) const {
  check_key(k);
  const KeySlot& s = store_[k];
  std::lock_guard lock(s.latch);
  return s.technique == Technique::Relocated && s.owned;
}

bool Node::quiescent() const { return relocation_.outstanding() == 0 && !replication_.round_active(); }

AccessCounts Node::access_counts() const {
  AccessCounts c;
  c.direct.resize(cfg_.num_keys);
  c.sampling.resize(cfg_.num_keys);
  for (Key k = 0; k < cfg_.num_keys; ++k) {
    c.direct[k] = direct_hits_[k].load();
    c.sampling[k] = sampling_hits_[k].load();
  }
  return c;
}

void Node::reset_access_counts() {
  for (Key k = 0; k < cfg_.num_keys; ++k) {
    direct_hits_[k] = 0;
    sampling_hits_[k] = 0;
  }
}

}  // namespace nups
