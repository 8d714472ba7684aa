#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/core/types.hpp"

namespace nups {

/// Replicate key k iff access_counts[k] > threshold_factor * mean(access_counts).
/// Throws InvalidInput on empty or all-zero counts.
std::vector<Technique> assign_techniques(std::span<const std::uint64_t> access_counts,
                                         double threshold_factor);

/// Replicate the `k` most frequently accessed keys (ties broken by lower key id).
std::vector<Technique> assign_top_k(std::span<const std::uint64_t> access_counts, std::uint64_t k);

std::vector<Technique> assign_all(std::uint64_t num_keys, Technique t);

/// Directory authority for a key: contiguous ranges of ceil(num_keys / Q) keys.
NodeId home_node_of(Key key, const ClusterConfig& cfg);
NodeId home_node_of(Key key, std::uint64_t num_keys, std::uint32_t num_nodes);

/// Half-open key range homed at `node`.
std::pair<Key, Key> home_range(NodeId node, std::uint64_t num_keys, std::uint32_t num_nodes);

}  // namespace nups
