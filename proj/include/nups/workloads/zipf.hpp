#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nups/sampling/alias_table.hpp"

namespace nups {

/// Zipf(s) over n items: the item of rank r is drawn with probability
/// proportional to r^-s. Ranks map to item ids through a seeded permutation so
/// hot items are spread over the id range. s = 0 is uniform.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent, std::uint64_t permutation_seed);

  std::size_t size() const { return items_.size(); }
  double exponent() const { return exponent_; }
  double probability(std::size_t item) const { return prob_[item]; }
  const std::vector<double>& probabilities() const { return prob_; }
  /// Item id of rank r (0-based).
  std::size_t item_of_rank(std::size_t r) const { return items_[r]; }

  template <typename Rng>
  std::size_t operator()(Rng& rng) const {
    return items_[alias_(rng)];
  }

 private:
  double exponent_;
  AliasTable alias_;
  std::vector<std::size_t> items_;
  std::vector<double> prob_;
};

}  // namespace nups
