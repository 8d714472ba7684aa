#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nups/core/config.hpp"
#include "nups/ps/cluster.hpp"
#include "nups/replication/replication_manager.hpp"
#include "nups/sampling/distribution.hpp"
#include "nups/sampling/sampling_manager.hpp"
#include "nups/transport/message.hpp"
#include "nups/workloads/embedding.hpp"
#include "nups/workloads/matrix.hpp"

namespace nups {

enum class WorkloadKind { MatrixFactorization, Embedding };

WorkloadKind parse_workload(std::string_view text);  // "mf" or "embed"
std::string_view to_string(WorkloadKind w);

struct TechniqueChoice {
  enum class Mode { Relocate, Heuristic, TopK };
  Mode mode = Mode::Heuristic;
  std::uint64_t top_k = 0;
};

/// "relocate", "heuristic" or "topk=K".
TechniqueChoice parse_technique_choice(std::string_view text);
std::string to_string(const TechniqueChoice& t);

struct ExperimentSpec {
  WorkloadKind workload = WorkloadKind::MatrixFactorization;
  /// num_keys and value_dim are derived from the workload.
  ClusterConfig cluster;
  TransportKind transport = TransportKind::Simulated;
  NetworkModel network;
  TechniqueChoice technique;
  ConformityLevel conformity;  // of the negative-sampling distribution
  std::uint32_t epochs = 10;

  MatrixDatasetConfig matrix;
  MfOptions mf;
  EmbeddingDatasetConfig embedding;
  EmbeddingOptions embed;

  /// Node whose view of the model is evaluated (replicas may differ).
  NodeId eval_viewer = 0;
};

struct EpochMetrics {
  std::uint32_t epoch = 0;
  double metric = 0.0;  // held-out RMSE (mf) or loss (embed)
  /// Virtual time under the simulator, wall time under TCP.
  Micros duration{0};
  MessageStats messages;
  std::uint64_t sync_rounds = 0;
  double sync_hz = 0.0;
  SamplingStats sampling;
  std::uint64_t direct_accesses = 0;
  std::uint64_t sampling_accesses = 0;
};

struct Report {
  ExperimentSpec spec;
  std::string metric_name;
  double initial_metric = 0.0;
  std::uint64_t num_keys = 0;
  std::uint64_t replicated_keys = 0;
  std::vector<EpochMetrics> epochs;
  /// Per-key accesses in the last epoch, split by direct and sampling access.
  std::vector<std::uint64_t> direct_histogram;
  std::vector<std::uint64_t> sampling_histogram;
  /// End-of-run invariant violations (ownership, replica agreement, counters).
  std::vector<std::string> invariant_failures;
  /// Wall-clock seconds of the whole run; not part of the serialized report.
  double wall_seconds = 0.0;
};

/// Generates the dataset, builds the cluster and trains for spec.epochs
/// epochs, evaluating after each. Deterministic under the simulated transport.
Report run_experiment(const ExperimentSpec& spec);

std::string report_json(const Report& r);
/// One row per epoch.
std::string epochs_csv(const Report& r);
/// Keys sorted by total accesses (descending): rank, key, direct, sampling.
std::string histogram_csv(const Report& r);
/// Writes report.json, epochs.csv and histogram.csv into `dir` (created if needed).
void write_report(const Report& r, const std::string& dir);

}  // namespace nups
