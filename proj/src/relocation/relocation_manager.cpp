#include "nups/relocation/relocation_manager.hpp"

#include <algorithm>
#include <memory>

#include "nups/core/techniques.hpp"
#include "nups/runtime/runtime.hpp"
#include "nups/transport/transport.hpp"

namespace nups {
namespace {

void check_relocated(const KeySlot& s, Key k) {
  if (s.technique != Technique::Relocated) {
    throw TechniqueMismatch("key " + std::to_string(k) + " is replicated, not relocated");
  }
}

void add_into(Value& dst, std::span<const Scalar> delta) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += delta[i];
}

}  // namespace

NodeId RelocationManager::home_of(Key k) const { return home_node_of(k, env_.cfg); }

void RelocationManager::send(Message m) {
  m.sender = env_.id;
  env_.transport.send(std::move(m));
}

void RelocationManager::observe(Key k, const KeySlot& s) const {
  if (version_hook_) version_hook_(k, s.version, s.value);
}

bool RelocationManager::is_local(Key k) const {
  const KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  return s.technique == Technique::Relocated && is_local_locked(s);
}

NodeId RelocationManager::directory_owner(Key k) const {
  const KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  return s.directory_owner;
}

bool RelocationManager::read_locked(KeySlot& s, Key k, std::span<Scalar> out, Cause cause, ReadDone done,
                                    std::uint64_t* version) {
  check_relocated(s, k);
  if (is_local_locked(s)) {
    std::copy(s.value.begin(), s.value.end(), out.begin());
    if (version) *version = s.version;
    return true;
  }
  QueuedOp op;
  op.kind = QueuedOp::Kind::Pull;
  op.cause = cause;
  issue_locked(s, k, std::move(op), std::move(done));
  return false;
}

bool RelocationManager::read(Key k, std::span<Scalar> out, Cause cause, ReadDone done, std::uint64_t* version) {
  KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  return read_locked(s, k, out, cause, std::move(done), version);
}

void RelocationManager::write_locked(KeySlot& s, Key k, std::span<const Scalar> delta, Cause cause) {
  check_relocated(s, k);
  if (is_local_locked(s)) {
    add_into(s.value, delta);
    ++s.version;
    observe(k, s);
    return;
  }
  QueuedOp op;
  op.kind = QueuedOp::Kind::Push;
  op.cause = cause;
  op.delta.assign(delta.begin(), delta.end());
  issue_locked(s, k, std::move(op), {});
}

void RelocationManager::write(Key k, std::span<const Scalar> delta, Cause cause) {
  KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  write_locked(s, k, delta, cause);
}

void RelocationManager::issue_locked(KeySlot& s, Key k, QueuedOp op, Completion done) {
  op.origin = env_.id;
  op.request_id = next_request_.fetch_add(1);
  // A hint is only followed while nothing else of ours is in flight for the
  // key, and later ops wait for the hinted one: a hinted op that hits a stale
  // owner takes a detour through the home node and must not be overtaken.
  const bool allow_hint = s.issued.empty();
  IssuedOp issued;
  issued.request_id = op.request_id;
  issued.done = std::move(done);
  s.issued.push_back(std::move(issued));
  outstanding_.fetch_add(1);
  if (s.hinted_request) {
    s.deferred.push_back(std::move(op));
    return;
  }
  route_locked(s, k, std::move(op), allow_hint);
}

void RelocationManager::route_locked(KeySlot& s, Key k, QueuedOp op, bool allow_hint) {
  const NodeId home = home_of(k);
  if (home == env_.id) {
    serve_locked(s, k, std::move(op), env_.id);
  } else if (allow_hint && env_.cfg.owner_hints && s.owner_hint && *s.owner_hint != env_.id) {
    s.hinted_request = op.request_id;
    forward(*s.owner_hint, k, op);
  } else {
    forward(home, k, op);
  }
}

void RelocationManager::forward(NodeId to, Key k, const QueuedOp& op) {
  Message m;
  m.receiver = to;
  m.origin = op.origin;
  m.request_id = op.request_id;
  m.cause = op.cause;
  m.keys = {k};
  switch (op.kind) {
    case QueuedOp::Kind::Pull:
      m.kind = MessageKind::PullReq;
      break;
    case QueuedOp::Kind::Push:
      m.kind = MessageKind::PushReq;
      m.payload = op.delta;
      break;
    case QueuedOp::Kind::Transfer:
      m.kind = MessageKind::LocalizeForward;
      break;
  }
  send(std::move(m));
}

void RelocationManager::serve_locked(KeySlot& s, Key k, QueuedOp op, NodeId from) {
  if (s.owned) {
    apply_locked(s, k, std::move(op));
    return;
  }
  const NodeId home = home_of(k);
  if (home == env_.id) {
    if (s.directory_owner == env_.id) {
      s.waiting.push_back(std::move(op));  // our own grant is on its way
    } else {
      forward(s.directory_owner, k, op);
    }
    return;
  }
  if (from == home) {
    // The home node only forwards to the designated owner: that is us, and
    // the grant has not arrived yet.
    s.waiting.push_back(std::move(op));
    return;
  }
  forward(home, k, op);  // reached us through a stale hint
}

void RelocationManager::apply_locked(KeySlot& s, Key k, QueuedOp&& op) {
  switch (op.kind) {
    case QueuedOp::Kind::Pull:
      if (op.origin == env_.id) {
        finish_locked(s, k, op.request_id, env_.id, s.value, s.version);
      } else {
        Message m;
        m.kind = MessageKind::PullResp;
        m.cause = op.cause;
        m.receiver = op.origin;
        m.origin = op.origin;
        m.request_id = op.request_id;
        m.keys = {k};
        m.versions = {s.version};
        m.payload = s.value;
        send(std::move(m));
      }
      break;
    case QueuedOp::Kind::Push:
      add_into(s.value, op.delta);
      ++s.version;
      observe(k, s);
      if (op.origin == env_.id) {
        finish_locked(s, k, op.request_id, env_.id, {}, s.version);
      } else {
        Message m;
        m.kind = MessageKind::PushAck;
        m.cause = op.cause;
        m.receiver = op.origin;
        m.origin = op.origin;
        m.request_id = op.request_id;
        m.keys = {k};
        m.versions = {s.version};
        send(std::move(m));
      }
      break;
    case QueuedOp::Kind::Transfer: {
      s.owned = false;
      ++s.version;
      observe(k, s);
      Message m;
      m.kind = MessageKind::LocalizeGrant;
      m.cause = op.cause;
      m.receiver = op.origin;
      m.origin = op.origin;
      m.keys = {k};
      m.versions = {s.version};
      m.payload = s.value;
      send(std::move(m));
      s.owner_hint = op.origin;
      std::fill(s.value.begin(), s.value.end(), Scalar{0});
      break;
    }
  }
}

void RelocationManager::finish_locked(KeySlot& s, Key k, std::uint64_t request_id, NodeId responder,
                                      std::span<const Scalar> value, std::uint64_t version) {
  auto it = std::find_if(s.issued.begin(), s.issued.end(),
                         [&](const IssuedOp& op) { return op.request_id == request_id; });
  if (it == s.issued.end() || it->answered) {
    throw RoutingError("relocation: unknown request " + std::to_string(request_id));
  }
  it->answered = true;
  it->value.assign(value.begin(), value.end());
  it->version = version;
  if (!s.owned && responder != env_.id) s.owner_hint = responder;
  if (s.hinted_request == request_id) {
    s.hinted_request.reset();
    while (!s.deferred.empty()) {
      QueuedOp op = std::move(s.deferred.front());
      s.deferred.pop_front();
      route_locked(s, k, std::move(op), false);
    }
  }
  while (!s.issued.empty() && s.issued.front().answered) {
    IssuedOp done = std::move(s.issued.front());
    s.issued.pop_front();
    outstanding_.fetch_sub(1);
    if (done.done) done.done(done.value, done.version);
  }
}

void RelocationManager::localize_locked(KeySlot& s, Key k, Cause cause, std::function<void()> done) {
  check_relocated(s, k);
  if (s.owned) {
    if (done) env_.runtime.post(std::move(done));
    return;
  }
  if (done) s.on_localized.push_back(std::move(done));
  if (s.localize_pending) return;
  s.localize_pending = true;
  const NodeId home = home_of(k);
  if (home == env_.id) {
    home_localize_locked(s, k, env_.id, cause);
  } else {
    Message m;
    m.kind = MessageKind::LocalizeReq;
    m.cause = cause;
    m.receiver = home;
    m.origin = env_.id;
    m.keys = {k};
    send(std::move(m));
  }
}

void RelocationManager::localize(Key k, Cause cause, std::function<void()> done) {
  KeySlot& s = env_.store[k];
  std::lock_guard lock(s.latch);
  localize_locked(s, k, cause, std::move(done));
}

void RelocationManager::localize_all(std::span<const Key> keys, Cause cause, std::function<void()> done) {
  if (!done) {
    for (Key k : keys) localize(k, cause);
    return;
  }
  if (keys.empty()) {
    env_.runtime.post(std::move(done));
    return;
  }
  struct Countdown {
    std::atomic<std::size_t> left;
    std::function<void()> done;
  };
  auto c = std::make_shared<Countdown>();
  c->left = keys.size();
  c->done = std::move(done);
  for (Key k : keys) {
    localize(k, cause, [c] {
      if (c->left.fetch_sub(1) == 1) c->done();
    });
  }
}

void RelocationManager::home_localize_locked(KeySlot& s, Key k, NodeId requester, Cause cause) {
  const NodeId old = s.directory_owner;
  s.directory_owner = requester;
  QueuedOp op;
  op.kind = QueuedOp::Kind::Transfer;
  op.origin = requester;
  op.cause = cause;
  if (old == env_.id) {
    if (s.owned) {
      apply_locked(s, k, std::move(op));
    } else {
      s.waiting.push_back(std::move(op));  // our own grant is on its way
    }
  } else {
    forward(old, k, op);
  }
}

void RelocationManager::on_grant(Message&& m) {
  const Key k = m.keys.at(0);
  KeySlot& s = env_.store[k];
  std::vector<std::function<void()>> callbacks;
  {
    std::lock_guard lock(s.latch);
    s.owned = true;
    s.localize_pending = false;
    s.value = std::move(m.payload);
    s.version = m.versions.at(0);
    s.owner_hint.reset();
    while (!s.waiting.empty()) {
      QueuedOp op = std::move(s.waiting.front());
      s.waiting.pop_front();
      if (s.owned) {
        apply_locked(s, k, std::move(op));
      } else {
        forward(*s.owner_hint, k, op);  // moved on again while draining
      }
    }
    callbacks = std::move(s.on_localized);
    s.on_localized.clear();
  }
  for (auto& cb : callbacks) env_.runtime.post(std::move(cb));
}

void RelocationManager::handle(Message&& m) {
  const Key k = m.keys.at(0);
  if (k >= env_.store.size()) throw RoutingError("relocation: key out of range");
  switch (m.kind) {
    case MessageKind::PullReq:
    case MessageKind::PushReq: {
      QueuedOp op;
      op.kind = m.kind == MessageKind::PullReq ? QueuedOp::Kind::Pull : QueuedOp::Kind::Push;
      op.origin = m.origin;
      op.request_id = m.request_id;
      op.cause = m.cause;
      op.delta = std::move(m.payload);
      KeySlot& s = env_.store[k];
      std::lock_guard lock(s.latch);
      serve_locked(s, k, std::move(op), m.sender);
      break;
    }
    case MessageKind::PullResp:
    case MessageKind::PushAck: {
      KeySlot& s = env_.store[k];
      std::lock_guard lock(s.latch);
      finish_locked(s, k, m.request_id, m.sender, m.payload, m.versions.at(0));
      break;
    }
    case MessageKind::LocalizeReq: {
      KeySlot& s = env_.store[k];
      std::lock_guard lock(s.latch);
      home_localize_locked(s, k, m.origin, m.cause);
      break;
    }
    case MessageKind::LocalizeForward: {
      QueuedOp op;
      op.kind = QueuedOp::Kind::Transfer;
      op.origin = m.origin;
      op.cause = m.cause;
      KeySlot& s = env_.store[k];
      std::lock_guard lock(s.latch);
      serve_locked(s, k, std::move(op), m.sender);
      break;
    }
    case MessageKind::LocalizeGrant:
      on_grant(std::move(m));
      break;
    case MessageKind::SyncExchange:
      throw RoutingError("relocation: unexpected sync message");
  }
}

}  // namespace nups
