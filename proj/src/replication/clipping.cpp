#include "nups/replication/clipping.hpp"

#include <algorithm>
#include <cmath>

namespace nups {

void NormTracker::observe(double norm, double smoothing) {
  ++count_;
  const double alpha = std::max(1.0 / static_cast<double>(count_), smoothing);
  mean_ += alpha * (norm - mean_);
}

double l2_norm(std::span<const Scalar> v) {
  double s = 0.0;
  for (Scalar x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

double clip_update(std::span<Scalar> delta, NormTracker& tracker, double factor, double smoothing) {
  double norm = l2_norm(delta);
  double scale = 1.0;
  if (tracker.count() > 0) {
    const double limit = factor * tracker.mean();
    if (norm > limit) {
      scale = limit / norm;
      for (auto& x : delta) x = static_cast<Scalar>(x * scale);
      norm = limit;
    }
  }
  tracker.observe(norm, smoothing);
  return scale;
}

}  // namespace nups
