#pragma once

#include <cstdint>
#include <span>

#include "nups/core/types.hpp"

namespace nups {

/// Running mean of update norms. A plain average for the first 1/smoothing
/// updates, an exponentially weighted mean afterwards.
class NormTracker {
 public:
  double mean() const { return mean_; }
  std::uint64_t count() const { return count_; }
  void observe(double norm, double smoothing);

 private:
  double mean_ = 0.0;
  std::uint64_t count_ = 0;
};

double l2_norm(std::span<const Scalar> v);

/// Rescales `delta` in place so that its norm is at most factor * tracker mean,
/// then feeds the (possibly clipped) norm to the tracker. The first update of a
/// key only seeds the tracker. Returns the scale applied (1 when unclipped).
double clip_update(std::span<Scalar> delta, NormTracker& tracker, double factor, double smoothing);

}  // namespace nups
