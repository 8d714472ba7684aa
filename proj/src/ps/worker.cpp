#include "nups/ps/worker.hpp"

#include <memory>

#include "nups/ps/node.hpp"

namespace nups {

WorkerContext::WorkerContext(Node& node, SamplingManager& sampling, std::uint32_t worker_index, std::uint64_t seed)
    : node_(node), sampling_(sampling), worker_index_(worker_index), rng_(seed) {}

NodeId WorkerContext::node_id() const { return node_.id(); }

Runtime& WorkerContext::runtime() { return node_.runtime(); }

Task<ValueBlock> WorkerContext::pull(std::vector<Key> keys, Cause cause) {
  ValueBlock out(keys.size(), node_.config().value_dim);
  auto signal = std::make_shared<Signal>(node_.runtime());
  ValueBlock* dst = &out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    signal->expect();
    const bool local = node_.read(keys[i], out.row(i), cause, [signal, dst, i](std::span<const Scalar> v, std::uint64_t) {
      std::copy(v.begin(), v.end(), dst->row(i).begin());
      signal->arrive();
    });
    if (local) signal->arrive();
  }
  co_await signal->wait();
  co_return out;
}

void WorkerContext::push(std::span<const Key> keys, const ValueBlock& deltas, Cause cause) {
  if (deltas.size() != keys.size()) throw InvalidInput("push: one delta row per key expected");
  if (deltas.dim() != node_.config().value_dim) throw InvalidInput("push: delta width does not match value_dim");
  for (std::size_t i = 0; i < keys.size(); ++i) node_.write(keys[i], deltas.row(i), cause);
}

void WorkerContext::push(Key key, std::span<const Scalar> delta, Cause cause) { node_.write(key, delta, cause); }

void WorkerContext::localize_hint(std::span<const Key> keys) {
  for (Key k : keys) node_.localize(k, Cause::Relocation);
}

SampleHandle WorkerContext::prepare_sample(DistributionId dist, std::size_t n) {
  return sampling_.prepare_sample(dist, n, rng_);
}

Task<SampleBatch> WorkerContext::pull_sample(SampleHandle& h, std::size_t n) {
  return sampling_.pull_sample(h, n, rng_);
}

Task<SampleBatch> WorkerContext::pull_sample(SampleHandle& h) { return sampling_.pull_sample(h, h.remaining(), rng_); }

}  // namespace nups
