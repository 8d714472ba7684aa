#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace nups {

/// Walker/Vose alias table: O(n) build, O(1) draws from a discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  /// Weights need not be normalized but must be finite, non-negative and not all zero.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return prob_.size(); }

  /// Maps one uniform variate in [0,1) to an outcome.
  std::size_t sample(double u) const {
    const double x = u * static_cast<double>(prob_.size());
    std::size_t i = static_cast<std::size_t>(x);
    if (i >= prob_.size()) i = prob_.size() - 1;
    return (x - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
  }

  template <typename Rng>
  std::size_t operator()(Rng& rng) const {
    return sample(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace nups
