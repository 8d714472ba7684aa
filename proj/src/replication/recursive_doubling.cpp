#include "nups/replication/recursive_doubling.hpp"

#include <bit>

namespace nups {

RecursiveDoubling::RecursiveDoubling(std::uint32_t num_nodes) : q_(num_nodes) {
  if (num_nodes == 0) throw InvalidInput("all-reduce needs at least one node");
  p_ = std::bit_floor(num_nodes);
  stages_ = static_cast<std::uint32_t>(std::countr_zero(p_));
}

std::optional<NodeId> RecursiveDoubling::extra_partner(NodeId n) const {
  if (n >= p_) return n - p_;
  if (n + p_ < q_) return n + p_;
  return std::nullopt;
}

std::uint64_t RecursiveDoubling::messages_per_round() const {
  return std::uint64_t{p_} * stages_ + 2ull * (q_ - p_);
}

std::vector<RecursiveDoubling::Edge> RecursiveDoubling::schedule() const {
  std::vector<Edge> edges;
  for (NodeId n = p_; n < q_; ++n) edges.push_back({n, n - p_, kFoldStage});
  for (std::uint32_t s = 0; s < stages_; ++s) {
    for (NodeId n = 0; n < p_; ++n) edges.push_back({n, stage_partner(n, s), s});
  }
  for (NodeId n = p_; n < q_; ++n) edges.push_back({n - p_, n, kUnfoldStage});
  return edges;
}

}  // namespace nups
