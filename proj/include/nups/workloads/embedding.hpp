#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/ps/node.hpp"
#include "nups/runtime/task.hpp"
#include "nups/sampling/distribution.hpp"
#include "nups/sampling/sampling_manager.hpp"

namespace nups {

class WorkerContext;

struct EmbeddingDatasetConfig {
  std::uint32_t entities = 1000;
  std::uint64_t pairs = 20'000;
  double zipf = 1.1;
  /// Entities fall into this many groups; positive pairs stay within a group.
  std::uint32_t groups = 16;
  double holdout = 0.05;
  /// Uniform negatives stored with each held-out pair for evaluation.
  std::uint32_t test_negatives = 3;
  std::uint64_t seed = 1;
};

struct EntityPair {
  std::uint32_t head;
  std::uint32_t tail;
  friend bool operator==(const EntityPair&, const EntityPair&) = default;
};

/// Positive (head, tail) pairs with Zipf-skewed entity frequencies.
struct EmbeddingDataset {
  EmbeddingDatasetConfig config;
  std::vector<EntityPair> train;
  std::vector<EntityPair> test;
  /// test_negatives entries per test pair.
  std::vector<std::uint32_t> test_negatives;
};

EmbeddingDataset generate_embedding_dataset(const EmbeddingDatasetConfig& cfg);

/// Layout (little endian): "NUPSEM01", u32 entities, u32 groups, u32
/// test_negatives, f64 zipf, f64 holdout, u64 seed, u64 pairs, u64 #train,
/// u64 #test, then train and test pairs as (u32 head, u32 tail), then
/// #test * test_negatives u32 entity ids.
void save_embedding_dataset(const EmbeddingDataset& d, const std::string& path);
EmbeddingDataset load_embedding_dataset(const std::string& path);

enum class NegativeDistribution { Uniform, Frequency };

NegativeDistribution parse_negative_distribution(std::string_view text);

/// Negative-sampling target: uniform over all entities, or proportional to
/// how often each entity appears as a training tail.
TargetDistribution negative_distribution(const EmbeddingDataset& d, NegativeDistribution kind, ConformityLevel level);

struct EmbeddingOptions {
  std::uint32_t dim = 16;
  std::uint32_t negatives = 3;
  double learning_rate = 0.05;
  double init_scale = 0.1;
  NegativeDistribution negative_kind = NegativeDistribution::Uniform;
  /// Virtual time charged per processed pair.
  Micros compute_per_pair{0};
};

/// -log sigmoid(score) for a positive pair, -log sigmoid(-score) for a negative one.
double logistic_loss(double score, bool positive);
/// Derivative of logistic_loss with respect to the score.
double logistic_loss_derivative(double score, bool positive);

/// Loss of one positive pair with its negatives: logistic loss of h.t plus the
/// logistic losses of h.n for each negative n.
double embedding_pair_loss(std::span<const Scalar> head, std::span<const Scalar> tail, const ValueBlock& negatives);
/// Gradients of embedding_pair_loss; grad_negatives has one row per negative.
void embedding_pair_gradient(std::span<const Scalar> head, std::span<const Scalar> tail, const ValueBlock& negatives,
                             std::span<Scalar> grad_head, std::span<Scalar> grad_tail, ValueBlock& grad_negatives);

Initializer embedding_initializer(std::uint32_t dim, double scale, std::uint64_t seed);

/// Expected accesses per key in one epoch: head and tail of each training
/// pair, plus `negatives` draws from pi per pair.
std::vector<std::uint64_t> embedding_access_counts(const EmbeddingDataset& d, const TargetDistribution& pi,
                                                   std::uint32_t negatives);

struct EmbeddingShard {
  std::vector<EntityPair> pairs;
  std::vector<std::uint32_t> heads;  // distinct heads of this shard
};

/// Pairs go to nodes by contiguous head blocks and round-robin to the workers of a node.
std::vector<EmbeddingShard> partition_embedding(const EmbeddingDataset& d, std::uint32_t nodes,
                                                std::uint32_t workers_per_node);

/// One SGD pass over a shard, drawing negatives through the sampling API
/// (prepared one pair ahead).
Task<void> embedding_worker_epoch(WorkerContext& w, const EmbeddingShard& shard, DistributionId negatives,
                                  const EmbeddingOptions& opts);

/// Mean pair loss over held-out pairs with their stored negatives.
double embedding_test_loss(const EmbeddingDataset& d, const std::function<Value(Key)>& lookup);

}  // namespace nups
