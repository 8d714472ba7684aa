#include "nups/sampling/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <boost/math/distributions/chi_squared.hpp>

namespace nups {

double chi_squared_quantile(double probability, double dof) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), probability);
}

ChiSquaredResult chi_squared_gof(std::span<const double> observed, std::span<const double> probabilities,
                                 double confidence, double min_expected) {
  if (observed.size() != probabilities.size()) throw InvalidInput("chi-squared: size mismatch");
  double n = 0.0;
  for (double o : observed) n += o;
  if (n <= 0.0) throw InvalidInput("chi-squared: no observations");

  ChiSquaredResult r;
  double pooled_obs = 0.0;
  double pooled_exp = 0.0;
  std::uint32_t bins = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probabilities[i];
    if (e < min_expected) {
      pooled_obs += observed[i];
      pooled_exp += e;
      continue;
    }
    r.statistic += (observed[i] - e) * (observed[i] - e) / e;
    ++bins;
  }
  if (pooled_exp > 0.0) {
    r.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++bins;
  } else if (pooled_obs > 0.0) {
    r.statistic = INFINITY;  // mass where pi has none
  }
  if (bins < 2) throw InvalidInput("chi-squared: fewer than two bins");
  r.dof = bins - 1;
  r.critical = chi_squared_quantile(confidence, r.dof);
  const boost::math::chi_squared_distribution<double> dist(r.dof);
  r.p_value = std::isfinite(r.statistic) ? boost::math::cdf(boost::math::complement(dist, r.statistic)) : 0.0;
  r.pass = r.statistic < r.critical;
  return r;
}

RepeatRateResult repeat_rate_test(std::span<const Key> seq, std::uint32_t lag, std::span<const double> pi,
                                  double z_limit) {
  RepeatRateResult r;
  r.lag = lag;
  if (lag == 0 || seq.size() <= lag) throw InvalidInput("repeat-rate: sequence shorter than lag");
  r.pairs = seq.size() - lag;
  for (std::size_t i = 0; i + lag < seq.size(); ++i) r.repeats += seq[i] == seq[i + lag];
  double p2 = 0.0;
  for (double p : pi) p2 += p * p;
  r.expected = static_cast<double>(r.pairs) * p2;
  const double sd = std::sqrt(static_cast<double>(r.pairs) * p2 * (1.0 - p2));
  r.z = sd > 0.0 ? (static_cast<double>(r.repeats) - r.expected) / sd : 0.0;
  r.pass = std::abs(r.z) < z_limit;
  return r;
}

double log_log_slope(std::vector<double> counts, std::size_t first_rank, std::size_t last_rank) {
  std::sort(counts.begin(), counts.end(), std::greater<>());
  last_rank = std::min(last_rank, counts.size() + 1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t rank = first_rank; rank < last_rank; ++rank) {
    const double c = counts[rank - 1];
    if (c <= 0.0) break;
    const double x = std::log(static_cast<double>(rank));
    const double y = std::log(c);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw InvalidInput("log-log slope needs at least two positive ranks");
  const double md = static_cast<double>(m);
  return (md * sxy - sx * sy) / (md * sxx - sx * sx);
}

}  // namespace nups
