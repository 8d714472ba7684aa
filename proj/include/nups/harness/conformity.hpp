#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nups/sampling/distribution.hpp"

namespace nups {

struct ConformityCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct ConformityReport {
  ConformityLevel level;
  std::vector<ConformityCheck> checks;
  bool pass() const;
};

struct BatteryOptions {
  ConformityLevel level;
  /// Samples per seed for the stream tests (L1, L2).
  std::uint64_t draws = 1'000'000;
  /// Target pi_k proportional to 1 / (k + 1) over this many keys.
  std::uint32_t keys = 100;
  std::uint32_t seeds = 100;
  std::uint32_t pool_size = 250;
  std::uint32_t use_frequency = 16;
  double confidence = 0.999;
  /// Fraction of seeds whose goodness-of-fit test must pass.
  double pass_fraction = 0.99;
  std::uint64_t seed = 1;

  /// Cluster runs for L3 and L4.
  std::uint32_t nodes = 4;
  std::uint32_t handles_per_node = 50;
  std::uint32_t cluster_seeds = 10;
};

/// Statistical and structural checks of one conformity level's sampling scheme:
///   L1  independent draws: goodness of fit per seed, repeat rates at small lags.
///   L2  pooled reuse: goodness of fit, exact use counts per pool, dependency distance.
///   L3  postponing through a simulated cluster: per-handle multisets, long-run fit.
///   L4  local sampling under a frozen allocation with a hot key: expected to
///       fail the node-level frequency test (a negative control).
ConformityReport run_conformity_battery(const BatteryOptions& options);

/// One line per check.
std::string format_report(const ConformityReport& r);

}  // namespace nups
