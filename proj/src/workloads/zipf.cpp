#include "nups/workloads/zipf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nups/core/types.hpp"

namespace nups {

ZipfSampler::ZipfSampler(std::size_t n, double exponent, std::uint64_t permutation_seed) : exponent_(exponent) {
  if (n == 0) throw InvalidInput("zipf: empty item range");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw InvalidInput("zipf: exponent must be finite and >= 0");
  std::vector<double> by_rank(n);
  for (std::size_t r = 0; r < n; ++r) by_rank[r] = std::pow(static_cast<double>(r + 1), -exponent);
  const double total = std::accumulate(by_rank.begin(), by_rank.end(), 0.0);
  for (auto& w : by_rank) w /= total;
  alias_ = AliasTable(by_rank);
  items_.resize(n);
  std::iota(items_.begin(), items_.end(), std::size_t{0});
  std::mt19937_64 rng(permutation_seed);
  std::shuffle(items_.begin(), items_.end(), rng);
  prob_.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) prob_[items_[r]] = by_rank[r];
}

}  // namespace nups
