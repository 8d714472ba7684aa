#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/runtime/simulator.hpp"
#include "nups/transport/transport.hpp"

namespace nups {

/// In-process network driven by the simulator. Each message is delivered as a
/// simulator event after latency + jitter + size/bandwidth; delivery times are
/// clamped per ordered pair so FIFO order holds even with jitter.
class SimTransport final : public Transport {
 public:
  SimTransport(Simulator& sim, std::uint32_t num_nodes, NetworkModel model = {});

  std::uint32_t num_nodes() const override { return num_nodes_; }
  void attach(NodeId node, Handler handler) override;
  void send(Message msg) override;
  std::uint64_t in_flight() const override { return in_flight_; }

  const NetworkModel& model() const { return model_; }

 private:
  Micros delay_for(const Message& m);

  Simulator& sim_;
  std::uint32_t num_nodes_;
  NetworkModel model_;
  std::mt19937_64 rng_;
  std::vector<Handler> handlers_;
  std::vector<Micros> last_delivery_;  // [sender * Q + receiver]
  std::uint64_t in_flight_ = 0;
};

}  // namespace nups
