#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nups/core/types.hpp"
#include "nups/ps/node.hpp"
#include "nups/runtime/task.hpp"

namespace nups {

class WorkerContext;

struct MatrixDatasetConfig {
  std::uint32_t rows = 1000;
  std::uint32_t cols = 1000;
  std::uint64_t cells = 100'000;
  std::uint32_t rank = 8;  // rank of the generating factors
  double zipf = 1.1;
  double noise = 0.1;
  double holdout = 0.05;
  std::uint64_t seed = 1;
};

struct Cell {
  std::uint32_t row;
  std::uint32_t col;
  double rating;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Revealed cells of a low-rank matrix plus noise. Cell positions follow
/// Zipf distributions over rows and over columns; (row, col) pairs are distinct.
struct MatrixDataset {
  MatrixDatasetConfig config;
  std::vector<Cell> train;
  std::vector<Cell> test;
};

MatrixDataset generate_matrix_dataset(const MatrixDatasetConfig& cfg);

/// Layout (little endian): "NUPSMF01", u32 rows, u32 cols, u32 rank, f64 zipf,
/// f64 noise, f64 holdout, u64 seed, u64 cells, u64 #train, u64 #test, then
/// train and test cells as (u32 row, u32 col, f64 rating).
void save_matrix_dataset(const MatrixDataset& d, const std::string& path);
MatrixDataset load_matrix_dataset(const std::string& path);

/// Parameter layout of the factorization: row r is key r, column c is key rows + c.
struct MfModel {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t rank = 0;

  Key row_key(std::uint32_t r) const { return r; }
  Key col_key(std::uint32_t c) const { return Key{rows} + c; }
  std::uint64_t num_keys() const { return std::uint64_t{rows} + cols; }
};

struct MfOptions {
  std::uint32_t rank = 8;
  double learning_rate = 0.02;
  double regularization = 0.01;
  double init_scale = 0.1;
  /// Virtual time charged per processed cell.
  Micros compute_per_cell{0};
};

/// Squared error plus L2 penalty of one cell: (r - u.v)^2 + lambda (|u|^2 + |v|^2).
double mf_cell_loss(std::span<const Scalar> u, std::span<const Scalar> v, double rating, double lambda);
/// Gradient of mf_cell_loss with respect to u and v.
void mf_cell_gradient(std::span<const Scalar> u, std::span<const Scalar> v, double rating, double lambda,
                      std::span<Scalar> grad_u, std::span<Scalar> grad_v);

/// Deterministic per-key N(0, scale^2) initial factors.
Initializer mf_initializer(std::uint32_t rank, double scale, std::uint64_t seed);

/// Accesses per key in one training epoch: one per training cell for its row and its column.
std::vector<std::uint64_t> mf_access_counts(const MatrixDataset& d);

/// Training cells of one worker, grouped by column.
struct MfShard {
  std::vector<std::uint32_t> columns;
  std::vector<std::vector<Cell>> cells;  // parallel to columns
  std::vector<std::uint32_t> rows;       // distinct rows of this shard
  std::uint64_t num_cells = 0;
};

/// Rows go to nodes in contiguous blocks, columns to the workers of a node by
/// column id modulo W. Shard q * W + w belongs to worker w of node q.
std::vector<MfShard> partition_mf(const MatrixDataset& d, std::uint32_t nodes, std::uint32_t workers_per_node);

/// One SGD pass over a shard. Columns are visited in random order; the next
/// column is localized while the current one is processed.
Task<void> mf_worker_epoch(WorkerContext& w, const MfModel& model, const MfShard& shard, const MfOptions& opts);

/// Root mean squared error of u.v against the ratings; `lookup` returns a key's value.
double mf_rmse(const std::vector<Cell>& cells, const MfModel& model, const std::function<Value(Key)>& lookup);

}  // namespace nups
