#include "nups/core/techniques.hpp"

#include <algorithm>
#include <numeric>

namespace nups {

std::vector<Technique> assign_techniques(std::span<const std::uint64_t> access_counts,
                                         double threshold_factor) {
  if (access_counts.empty()) throw InvalidInput("assign_techniques: no access counts");
  if (!(threshold_factor > 0.0)) throw InvalidInput("assign_techniques: threshold factor must be > 0");
  long double total = 0;
  for (auto c : access_counts) total += c;
  if (total == 0) throw InvalidInput("assign_techniques: all access counts are zero");

  // Strict inequality at the boundary.
  const long double threshold =
      static_cast<long double>(threshold_factor) * total / static_cast<long double>(access_counts.size());
  std::vector<Technique> out(access_counts.size(), Technique::Relocated);
  for (std::size_t k = 0; k < access_counts.size(); ++k) {
    if (static_cast<long double>(access_counts[k]) > threshold) out[k] = Technique::Replicated;
  }
  return out;
}

std::vector<Technique> assign_top_k(std::span<const std::uint64_t> access_counts, std::uint64_t k) {
  std::vector<Key> order(access_counts.size());
  std::iota(order.begin(), order.end(), Key{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Key a, Key b) { return access_counts[a] > access_counts[b]; });
  std::vector<Technique> out(access_counts.size(), Technique::Relocated);
  for (std::uint64_t i = 0; i < std::min<std::uint64_t>(k, order.size()); ++i) {
    out[order[i]] = Technique::Replicated;
  }
  return out;
}

std::vector<Technique> assign_all(std::uint64_t num_keys, Technique t) {
  return std::vector<Technique>(num_keys, t);
}

NodeId home_node_of(Key key, std::uint64_t num_keys, std::uint32_t num_nodes) {
  const std::uint64_t per_node = (num_keys + num_nodes - 1) / num_nodes;
  return static_cast<NodeId>(key / per_node);
}

NodeId home_node_of(Key key, const ClusterConfig& cfg) {
  return home_node_of(key, cfg.num_keys, cfg.num_nodes);
}

std::pair<Key, Key> home_range(NodeId node, std::uint64_t num_keys, std::uint32_t num_nodes) {
  const std::uint64_t per_node = (num_keys + num_nodes - 1) / num_nodes;
  const Key begin = std::min<std::uint64_t>(num_keys, per_node * node);
  const Key end = std::min<std::uint64_t>(num_keys, begin + per_node);
  return {begin, end};
}

}  // namespace nups
