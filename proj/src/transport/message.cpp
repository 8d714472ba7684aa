#include "nups/transport/message.hpp"

namespace nups {

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::PullReq: return "PullReq";
    case MessageKind::PullResp: return "PullResp";
    case MessageKind::PushReq: return "PushReq";
    case MessageKind::PushAck: return "PushAck";
    case MessageKind::LocalizeReq: return "LocalizeReq";
    case MessageKind::LocalizeForward: return "LocalizeForward";
    case MessageKind::LocalizeGrant: return "LocalizeGrant";
    case MessageKind::SyncExchange: return "SyncExchange";
  }
  return "?";
}

MessageStats MessageStats::operator-(const MessageStats& o) const {
  MessageStats d;
  for (std::size_t i = 0; i < kNumMessageKinds; ++i) d.by_kind[i] = by_kind[i] - o.by_kind[i];
  for (std::size_t i = 0; i < kNumCauses; ++i) d.by_cause[i] = by_cause[i] - o.by_cause[i];
  d.total = total - o.total;
  d.payload_bytes = payload_bytes - o.payload_bytes;
  return d;
}

MessageStats& MessageStats::operator+=(const MessageStats& o) {
  for (std::size_t i = 0; i < kNumMessageKinds; ++i) by_kind[i] += o.by_kind[i];
  for (std::size_t i = 0; i < kNumCauses; ++i) by_cause[i] += o.by_cause[i];
  total += o.total;
  payload_bytes += o.payload_bytes;
  return *this;
}

void MessageCounters::count(const Message& m) {
  by_kind_[static_cast<std::size_t>(m.kind)].fetch_add(1, std::memory_order_relaxed);
  by_cause_[static_cast<std::size_t>(m.cause)].fetch_add(1, std::memory_order_relaxed);
  total_.fetch_add(1, std::memory_order_relaxed);
  payload_bytes_.fetch_add(m.payload.size() * sizeof(Scalar), std::memory_order_relaxed);
}

MessageStats MessageCounters::snapshot() const {
  MessageStats s;
  for (std::size_t i = 0; i < kNumMessageKinds; ++i) s.by_kind[i] = by_kind_[i].load();
  for (std::size_t i = 0; i < kNumCauses; ++i) s.by_cause[i] = by_cause_[i].load();
  s.total = total_.load();
  s.payload_bytes = payload_bytes_.load();
  return s;
}

}  // namespace nups
