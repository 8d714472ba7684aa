#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/sampling/alias_table.hpp"

namespace nups {

/// How closely delivered samples must follow the target distribution.
///   L1: every sample an independent draw.
///   L2: any window of `bound` consecutive samples looks independent; samples
///       may repeat beyond that.
///   L3: samples of one handle may be reordered within the handle.
///   L4: samples may be restricted to keys available locally.
enum class ConformityKind : std::uint8_t { L1, L2, L3, L4 };

struct ConformityLevel {
  ConformityKind kind = ConformityKind::L1;
  /// Window size for L2. 0 means the natural window U * G of pooled reuse.
  std::uint64_t bound = 0;
};

/// Parses "L1", "L2", "L2:<bound>", "L3" or "L4" (case-insensitive).
ConformityLevel parse_conformity(std::string_view text);
std::string to_string(const ConformityLevel& level);

enum class SchemeKind : std::uint8_t { Independent, PooledReuse, PooledReusePostponing, Local };

std::string_view to_string(SchemeKind s);

struct SchemeChoice {
  SchemeKind kind;
  std::uint32_t pool_size;  // effective G for pooled schemes
};

/// Picks the cheapest scheme that meets `level` for pool size G and use
/// frequency U. An L2 bound below U * G shrinks the pool to bound / U keys;
/// below U it falls back to independent sampling.
SchemeChoice choose_scheme(const ConformityLevel& level, std::uint32_t pool_size, std::uint32_t use_frequency);

/// Target distribution pi over a subset of the key space.
class TargetDistribution {
 public:
  TargetDistribution(std::vector<Key> support, std::vector<double> probabilities, ConformityLevel level);

  /// Distribution over keys 0..pi.size()-1; zero-probability keys are dropped.
  static TargetDistribution over_keys(std::span<const double> pi, ConformityLevel level);

  const std::vector<Key>& support() const { return support_; }
  const std::vector<double>& probabilities() const { return probs_; }
  const ConformityLevel& level() const { return level_; }
  double probability(Key k) const;

  template <typename Rng>
  Key draw(Rng& rng) const {
    return support_[alias_(rng)];
  }

 private:
  std::vector<Key> support_;
  std::vector<double> probs_;
  ConformityLevel level_;
  AliasTable alias_;
  std::unordered_map<Key, std::size_t> index_;
};

}  // namespace nups
