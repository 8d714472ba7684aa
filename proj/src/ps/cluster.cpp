#include "nups/ps/cluster.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "nups/core/random.hpp"
#include "nups/runtime/thread_runtime.hpp"
#include "nups/transport/sim_transport.hpp"
#include "nups/transport/tcp_transport.hpp"

namespace nups {

Cluster::Cluster(ClusterOptions options) : cfg_(options.config), techniques_(std::move(options.techniques)) {
  cfg_.validate();
  if (techniques_.empty()) techniques_.assign(cfg_.num_keys, Technique::Relocated);
  if (techniques_.size() != cfg_.num_keys) throw InvalidInput("technique vector does not cover all keys");

  if (options.transport == TransportKind::Simulated) {
    auto sim = std::make_unique<Simulator>();
    sim_ = sim.get();
    runtime_ = std::move(sim);
    transport_ = std::make_unique<SimTransport>(*sim_, cfg_.num_nodes, options.network);
  } else {
    runtime_ = std::make_unique<ThreadRuntime>();
    std::vector<TcpEndpoint> endpoints(cfg_.num_nodes);
    std::vector<NodeId> local(cfg_.num_nodes);
    for (NodeId q = 0; q < cfg_.num_nodes; ++q) local[q] = q;
    transport_ = std::make_unique<TcpTransport>(std::move(endpoints), std::move(local));
  }

  for (NodeId q = 0; q < cfg_.num_nodes; ++q) {
    nodes_.push_back(std::make_unique<Node>(q, cfg_, techniques_, *runtime_, *transport_, options.init));
    sampling_.push_back(
        std::make_unique<SamplingManager>(*nodes_.back(), mix_seed(cfg_.rng_seed, 1000 + q), options.sampling));
  }
  for (NodeId q = 0; q < cfg_.num_nodes; ++q) {
    Node* n = nodes_[q].get();
    transport_->attach(q, [n](Message&& m) { n->handle(std::move(m)); });
  }
  for (NodeId q = 0; q < cfg_.num_nodes; ++q) {
    for (std::uint32_t w = 0; w < cfg_.workers_per_node; ++w) {
      const std::uint64_t seed = mix_seed(cfg_.rng_seed, (std::uint64_t{q} << 32) | w);
      workers_.push_back(std::make_unique<WorkerContext>(*nodes_[q], *sampling_[q], w, seed));
    }
  }
}

Cluster::~Cluster() {
  for (auto& n : nodes_) n->replication().stop_schedule_at(0);
  if (auto* tr = dynamic_cast<ThreadRuntime*>(runtime_.get())) tr->shutdown();
  if (auto* tcp = dynamic_cast<TcpTransport*>(transport_.get())) tcp->close();
}

DistributionId Cluster::register_distribution(TargetDistribution dist) {
  auto shared = std::make_shared<const TargetDistribution>(std::move(dist));
  const DistributionId id = next_distribution_++;
  for (auto& s : sampling_) s->register_distribution(id, shared);
  return id;
}

void Cluster::run_workers(const std::function<Task<void>(WorkerContext&)>& body) {
  if (sim_) {
    std::vector<Task<void>> tasks;
    tasks.reserve(workers_.size());
    for (auto& w : workers_) tasks.push_back(body(*w));
    for (auto& t : tasks) sim_->post([&t] { t.start(); });
    run_until([&] { return std::all_of(tasks.begin(), tasks.end(), [](const Task<void>& t) { return t.done(); }); });
    for (auto& t : tasks) t.result();
    return;
  }
  std::vector<std::exception_ptr> errors(workers_.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          run_blocking(body(*workers_[i]));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void Cluster::run_until(const std::function<bool()>& done, Micros timeout) {
  if (sim_) {
    const Micros deadline = sim_->now() + timeout;
    while (!done()) {
      if (sim_->now() > deadline) throw std::runtime_error("simulation timed out");
      if (!sim_->step()) {
        if (done()) return;
        throw std::runtime_error("simulation stalled: no events left");
      }
    }
    return;
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!done()) {
    if (std::chrono::steady_clock::now() > deadline) throw std::runtime_error("cluster timed out");
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }
}

void Cluster::quiesce() {
  auto idle = [&] {
    // Sync rounds may run back to back; they never block a quiesced worker.
    if (transport_->in_flight_excluding_sync() != 0) return false;
    return std::all_of(nodes_.begin(), nodes_.end(), [](const auto& n) { return n->relocation().outstanding() == 0; });
  };
  if (sim_) {
    // Callbacks due at the same instant may still send; drain them too.
    do {
      run_until(idle);
      sim_->run_for(Micros::zero());
    } while (!idle());
    return;
  }
  int stable = 0;
  while (stable < 3) {
    stable = idle() ? stable + 1 : 0;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

bool Cluster::sync_enabled() const {
  return cfg_.staleness_interval != kNever && nodes_.front()->replication().has_replicated_keys();
}

void Cluster::start_sync() {
  for (auto& n : nodes_) n->replication().start_schedule();
}

void Cluster::stop_sync() {
  std::uint64_t started = 0;
  for (auto& n : nodes_) started = std::max(started, n->replication().stats().rounds_started);
  for (auto& n : nodes_) n->replication().stop_schedule_at(started);
  run_until([&] {
    return std::all_of(nodes_.begin(), nodes_.end(), [&](const auto& n) {
      const auto& r = n->replication();
      return r.stats().rounds_completed == started && !r.round_active();
    });
  });
}

void Cluster::flush_sync() {
  if (!nodes_.front()->replication().has_replicated_keys()) return;
  const std::uint64_t target = nodes_.front()->replication().stats().rounds_completed + 1;
  for (auto& n : nodes_) n->replication().start_round();
  run_until([&] {
    return std::all_of(nodes_.begin(), nodes_.end(), [&](const auto& n) {
      return n->replication().stats().rounds_completed == target;
    });
  });
}

Value Cluster::model_value(Key k, NodeId viewer) const {
  if (k >= cfg_.num_keys) throw InvalidInput("key out of range");
  if (techniques_[k] == Technique::Replicated) return *nodes_.at(viewer)->inspect(k);
  for (const auto& n : nodes_) {
    if (auto v = n->inspect(k)) return *v;
  }
  throw std::logic_error("relocated key " + std::to_string(k) + " has no owner (relocation in flight)");
}

SyncStats Cluster::sync_stats() const { return nodes_.front()->replication().stats(); }

SamplingStats Cluster::sampling_stats() const {
  SamplingStats total;
  for (const auto& s : sampling_) total += s->stats();
  return total;
}

}  // namespace nups
