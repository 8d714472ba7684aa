#include "nups/transport/sim_transport.hpp"

#include <cmath>
#include <string>

namespace nups {

SimTransport::SimTransport(Simulator& sim, std::uint32_t num_nodes, NetworkModel model)
    : sim_(sim),
      num_nodes_(num_nodes),
      model_(model),
      rng_(model.seed),
      handlers_(num_nodes),
      last_delivery_(static_cast<std::size_t>(num_nodes) * num_nodes, Micros::zero()) {}

void SimTransport::attach(NodeId node, Handler handler) {
  if (node >= num_nodes_) throw RoutingError("attach: node " + std::to_string(node) + " out of range");
  handlers_[node] = std::move(handler);
}

Micros SimTransport::delay_for(const Message& m) {
  Micros d = model_.latency;
  if (model_.jitter > Micros::zero()) {
    d += Micros(static_cast<std::int64_t>(rng_() % static_cast<std::uint64_t>(model_.jitter.count() + 1)));
  }
  if (model_.bandwidth > 0.0) {
    const double bytes = 40.0 + 8.0 * (m.keys.size() + m.versions.size()) + sizeof(Scalar) * m.payload.size();
    d += Micros(static_cast<std::int64_t>(std::ceil(bytes / model_.bandwidth)));
  }
  return d;
}

void SimTransport::send(Message msg) {
  if (msg.receiver >= num_nodes_ || !handlers_[msg.receiver]) {
    throw RoutingError("send: unknown receiver " + std::to_string(msg.receiver));
  }
  on_send(msg);
  auto& last = last_delivery_[static_cast<std::size_t>(msg.sender) * num_nodes_ + msg.receiver];
  const Micros at = std::max(sim_.now() + delay_for(msg), last);
  last = at;
  ++in_flight_;
  sim_.schedule_at(at, [this, m = std::move(msg)]() mutable {
    --in_flight_;
    const Cause cause = m.cause;
    handlers_[m.receiver](std::move(m));
    on_delivered(cause);
  });
}

}  // namespace nups
