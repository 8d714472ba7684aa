#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nups/core/types.hpp"

namespace nups {

struct ClusterConfig {
  std::uint32_t num_nodes = 1;
  std::uint32_t workers_per_node = 1;
  std::uint32_t value_dim = 1;
  std::uint64_t num_keys = 1;

  /// kNever disables replica synchronization.
  Micros staleness_interval{40'000};
  double replication_threshold_factor = 100.0;

  std::uint32_t pool_size = 250;      // G
  std::uint32_t use_frequency = 16;   // U

  bool clip_enabled = false;
  double clip_factor = 2.0;
  /// Smoothing of the per-key running mean of update norms. The mean is a
  /// plain running average for the first 1/clip_smoothing updates.
  double clip_smoothing = 0.01;

  /// Requesters remember the last node that served a relocated key.
  bool owner_hints = true;

  std::uint64_t rng_seed = 1;

  void validate() const;
};

/// Simulated network. Latency is per message, bandwidth adds a size term.
struct NetworkModel {
  Micros latency{100};
  /// Uniform extra delay in [0, jitter], drawn per message from a seeded stream.
  Micros jitter{0};
  /// Bytes per microsecond; 0 disables the size term.
  double bandwidth = 1250.0;
  std::uint64_t seed = 7;
};

/// Applies one `name=value` setting. Unknown names throw InvalidInput.
void apply_setting(ClusterConfig& cfg, std::string_view name, std::string_view value);

/// Reads a config file. JSON objects and `key=value` lines (with `#` comments)
/// are both accepted; the format is detected from the first non-blank char.
ClusterConfig load_cluster_config(const std::filesystem::path& path);

ClusterConfig parse_cluster_config(std::string_view text);

/// Parses "40", "40ms", "1s", "inf"/"never"/"off" into a staleness interval.
Micros parse_duration_ms(std::string_view text);

std::string format_duration_ms(Micros d);

}  // namespace nups
