#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nups/core/types.hpp"

namespace nups {

/// Communication pattern of one all-reduce among `num_nodes` nodes. With
/// P the largest power of two not above Q, nodes P..Q-1 first fold their
/// contribution into node q-P, the first P nodes run log2(P) pairwise
/// exchange stages (partner q xor 2^s), and the folded nodes get the result
/// back at the end.
class RecursiveDoubling {
 public:
  static constexpr std::uint32_t kFoldStage = 1u << 30;
  static constexpr std::uint32_t kUnfoldStage = kFoldStage + 1;

  explicit RecursiveDoubling(std::uint32_t num_nodes);

  std::uint32_t num_nodes() const { return q_; }
  std::uint32_t core_size() const { return p_; }
  std::uint32_t num_stages() const { return stages_; }

  /// True for nodes that only fold in and receive the result.
  bool is_extra(NodeId n) const { return n >= p_; }
  /// The folded node that pairs with `n`, if any.
  std::optional<NodeId> extra_partner(NodeId n) const;
  NodeId stage_partner(NodeId n, std::uint32_t stage) const { return n ^ (1u << stage); }

  /// Messages one round sends across the cluster.
  std::uint64_t messages_per_round() const;

  /// All (sender, receiver, stage) triples of one round, in stage order.
  struct Edge {
    NodeId from;
    NodeId to;
    std::uint32_t stage;
  };
  std::vector<Edge> schedule() const;

 private:
  std::uint32_t q_;
  std::uint32_t p_;
  std::uint32_t stages_;
};

}  // namespace nups
