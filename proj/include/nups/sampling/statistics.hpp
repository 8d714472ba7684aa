#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nups/core/types.hpp"

namespace nups {

struct ChiSquaredResult {
  double statistic = 0.0;
  std::uint32_t dof = 0;
  double critical = 0.0;  // quantile of the chi-squared distribution at `confidence`
  double p_value = 1.0;
  bool pass = false;
};

/// Quantile of the chi-squared distribution with `dof` degrees of freedom.
double chi_squared_quantile(double probability, double dof);

/// Pearson goodness-of-fit of `observed` counts against `probabilities`.
/// Bins with expected count below `min_expected` are merged into one bin.
/// Passes when the statistic is below the `confidence` quantile.
ChiSquaredResult chi_squared_gof(std::span<const double> observed, std::span<const double> probabilities,
                                 double confidence = 0.999, double min_expected = 5.0);

struct RepeatRateResult {
  std::uint32_t lag = 0;
  std::uint64_t pairs = 0;
  std::uint64_t repeats = 0;
  double expected = 0.0;
  double z = 0.0;
  bool pass = false;
};

/// Counts positions i with seq[i] == seq[i + lag] and compares with the
/// independent-draw expectation sum_k pi_k^2 via a normal approximation.
/// `pi` is indexed by key.
RepeatRateResult repeat_rate_test(std::span<const Key> seq, std::uint32_t lag, std::span<const double> pi,
                                  double z_limit = 4.0);

/// Least-squares slope of log(count) against log(rank) over ranks
/// [first_rank, last_rank) of the descending-sorted counts (ranks from 1).
double log_log_slope(std::vector<double> counts, std::size_t first_rank, std::size_t last_rank);

}  // namespace nups
