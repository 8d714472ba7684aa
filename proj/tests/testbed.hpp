#pragma once

#include <memory>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/ps/node.hpp"
#include "nups/runtime/simulator.hpp"
#include "nups/transport/sim_transport.hpp"

namespace nups::testing {

/// Nodes on a simulated network, wired by hand so tests can log deliveries.
struct TestBed {
  ClusterConfig cfg;
  std::vector<Technique> techniques;
  Simulator sim;
  std::unique_ptr<SimTransport> net;
  std::vector<std::unique_ptr<Node>> nodes;
  std::vector<Message> delivered;
  bool log_deliveries = false;

  TestBed(ClusterConfig c, std::vector<Technique> t, NetworkModel model = {}, Initializer init = {})
      : cfg(c), techniques(std::move(t)) {
    if (techniques.empty()) techniques.assign(cfg.num_keys, Technique::Relocated);
    net = std::make_unique<SimTransport>(sim, cfg.num_nodes, model);
    for (NodeId q = 0; q < cfg.num_nodes; ++q) {
      nodes.push_back(std::make_unique<Node>(q, cfg, techniques, sim, *net, init));
    }
    for (NodeId q = 0; q < cfg.num_nodes; ++q) {
      net->attach(q, [this, q](Message&& m) {
        if (log_deliveries) delivered.push_back(m);
        nodes[q]->handle(std::move(m));
      });
    }
  }

  Node& node(NodeId q) { return *nodes[q]; }

  void drain() {
    while (sim.step()) {
    }
  }

  std::uint64_t messages() const { return net->stats().total; }
  MessageStats stats() const { return net->stats(); }

  /// The single owner of a relocated key; fails the test if there is not exactly one.
  NodeId owner_of(Key k) const {
    NodeId owner = 0;
    int owners = 0;
    for (const auto& n : nodes) {
      if (n->owns(k)) {
        owner = n->id();
        ++owners;
      }
    }
    if (owners != 1) throw std::logic_error("key has " + std::to_string(owners) + " owners");
    return owner;
  }
};

inline ClusterConfig small_config(std::uint32_t q, std::uint64_t keys, std::uint32_t dim = 2) {
  ClusterConfig c;
  c.num_nodes = q;
  c.num_keys = keys;
  c.value_dim = dim;
  return c;
}

}  // namespace nups::testing
