#include "nups/workloads/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_set>

#include "binary_io.hpp"
#include "nups/core/random.hpp"
#include "nups/ps/worker.hpp"
#include "nups/workloads/zipf.hpp"

namespace nups {
namespace {

double dot(std::span<const Scalar> a, std::span<const Scalar> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

constexpr char kMagic[9] = "NUPSMF01";

}  // namespace

MatrixDataset generate_matrix_dataset(const MatrixDatasetConfig& cfg) {
  if (cfg.rows == 0 || cfg.cols == 0 || cfg.rank == 0) throw InvalidInput("matrix dataset: empty dimension");
  if (cfg.cells == 0 || cfg.cells > std::uint64_t{cfg.rows} * cfg.cols) {
    throw InvalidInput("matrix dataset: cell count must be in [1, rows * cols]");
  }
  if (cfg.holdout < 0.0 || cfg.holdout >= 1.0) throw InvalidInput("matrix dataset: holdout must be in [0, 1)");
  const ZipfSampler row_dist(cfg.rows, cfg.zipf, mix_seed(cfg.seed, 1));
  const ZipfSampler col_dist(cfg.cols, cfg.zipf, mix_seed(cfg.seed, 2));

  // Factor entries with variance 1/sqrt(rank) give ratings of unit variance.
  std::mt19937_64 frng(mix_seed(cfg.seed, 4));
  std::normal_distribution<double> factor(0.0, std::pow(static_cast<double>(cfg.rank), -0.25));
  std::vector<double> u(std::size_t{cfg.rows} * cfg.rank), v(std::size_t{cfg.cols} * cfg.rank);
  for (auto& x : u) x = factor(frng);
  for (auto& x : v) x = factor(frng);

  std::mt19937_64 rng(mix_seed(cfg.seed, 3));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(cfg.cells * 2);
  std::vector<Cell> cells;
  cells.reserve(cfg.cells);
  const std::uint64_t max_tries = 200 * cfg.cells + 10'000;
  std::uint64_t tries = 0;
  while (cells.size() < cfg.cells) {
    if (++tries > max_tries) throw InvalidInput("matrix dataset: too many cells for the skew; lower cells or zipf");
    const auto r = static_cast<std::uint32_t>(row_dist(rng));
    const auto c = static_cast<std::uint32_t>(col_dist(rng));
    if (!taken.insert(std::uint64_t{r} * cfg.cols + c).second) continue;
    double rating = 0.0;
    for (std::uint32_t i = 0; i < cfg.rank; ++i) rating += u[std::size_t{r} * cfg.rank + i] * v[std::size_t{c} * cfg.rank + i];
    rating += cfg.noise * noise(rng);
    cells.push_back({r, c, rating});
  }

  std::mt19937_64 split(mix_seed(cfg.seed, 5));
  std::shuffle(cells.begin(), cells.end(), split);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.holdout * static_cast<double>(cells.size())));
  MatrixDataset d;
  d.config = cfg;
  d.test.assign(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_test));
  d.train.assign(cells.begin() + static_cast<std::ptrdiff_t>(n_test), cells.end());
  return d;
}

void save_matrix_dataset(const MatrixDataset& d, const std::string& path) {
  detail::BinaryWriter w(path);
  w.magic(kMagic);
  const auto& c = d.config;
  w.put(c.rows);
  w.put(c.cols);
  w.put(c.rank);
  w.put(c.zipf);
  w.put(c.noise);
  w.put(c.holdout);
  w.put(c.seed);
  w.put(c.cells);
  w.put(static_cast<std::uint64_t>(d.train.size()));
  w.put(static_cast<std::uint64_t>(d.test.size()));
  for (const auto* part : {&d.train, &d.test}) {
    for (const Cell& cell : *part) {
      w.put(cell.row);
      w.put(cell.col);
      w.put(cell.rating);
    }
  }
  w.finish(path);
}

MatrixDataset load_matrix_dataset(const std::string& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  MatrixDataset d;
  auto& c = d.config;
  c.rows = r.get<std::uint32_t>();
  c.cols = r.get<std::uint32_t>();
  c.rank = r.get<std::uint32_t>();
  c.zipf = r.get<double>();
  c.noise = r.get<double>();
  c.holdout = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.cells = r.get<std::uint64_t>();
  const auto n_train = r.get<std::uint64_t>();
  const auto n_test = r.get<std::uint64_t>();
  if (n_train + n_test != c.cells) throw InvalidInput(path + ": cell counts do not add up");
  for (auto [part, n] : {std::pair{&d.train, n_train}, std::pair{&d.test, n_test}}) {
    part->reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      Cell cell;
      cell.row = r.get<std::uint32_t>();
      cell.col = r.get<std::uint32_t>();
      cell.rating = r.get<double>();
      if (cell.row >= c.rows || cell.col >= c.cols) throw InvalidInput(path + ": cell out of range");
      part->push_back(cell);
    }
  }
  return d;
}

double mf_cell_loss(std::span<const Scalar> u, std::span<const Scalar> v, double rating, double lambda) {
  const double err = rating - dot(u, v);
  return err * err + lambda * (dot(u, u) + dot(v, v));
}

void mf_cell_gradient(std::span<const Scalar> u, std::span<const Scalar> v, double rating, double lambda,
                      std::span<Scalar> grad_u, std::span<Scalar> grad_v) {
  const double err = rating - dot(u, v);
  for (std::size_t i = 0; i < u.size(); ++i) {
    grad_u[i] = static_cast<Scalar>(-2.0 * err * v[i] + 2.0 * lambda * u[i]);
    grad_v[i] = static_cast<Scalar>(-2.0 * err * u[i] + 2.0 * lambda * v[i]);
  }
}

Initializer mf_initializer(std::uint32_t rank, double scale, std::uint64_t seed) {
  return [rank, scale, seed](Key k) {
    std::mt19937_64 rng(mix_seed(seed, k));
    std::normal_distribution<double> g(0.0, scale);
    Value v(rank);
    for (auto& x : v) x = static_cast<Scalar>(g(rng));
    return v;
  };
}

std::vector<std::uint64_t> mf_access_counts(const MatrixDataset& d) {
  const MfModel m{d.config.rows, d.config.cols, 0};
  std::vector<std::uint64_t> counts(m.num_keys(), 0);
  for (const Cell& c : d.train) {
    ++counts[m.row_key(c.row)];
    ++counts[m.col_key(c.col)];
  }
  return counts;
}

std::vector<MfShard> partition_mf(const MatrixDataset& d, std::uint32_t nodes, std::uint32_t workers_per_node) {
  if (nodes == 0 || workers_per_node == 0) throw InvalidInput("partition_mf: need at least one worker");
  std::vector<MfShard> shards(std::size_t{nodes} * workers_per_node);
  std::vector<std::map<std::uint32_t, std::vector<Cell>>> by_col(shards.size());
  for (const Cell& c : d.train) {
    const auto q = static_cast<std::uint32_t>(std::uint64_t{c.row} * nodes / d.config.rows);
    const std::uint32_t w = c.col % workers_per_node;
    by_col[std::size_t{q} * workers_per_node + w][c.col].push_back(c);
  }
  for (std::size_t s = 0; s < shards.size(); ++s) {
    std::vector<std::uint32_t> rows;
    for (auto& [col, cells] : by_col[s]) {
      shards[s].columns.push_back(col);
      shards[s].num_cells += cells.size();
      for (const Cell& c : cells) rows.push_back(c.row);
      shards[s].cells.push_back(std::move(cells));
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    shards[s].rows = std::move(rows);
  }
  return shards;
}

Task<void> mf_worker_epoch(WorkerContext& w, const MfModel& model, const MfShard& shard, const MfOptions& opts) {
  std::vector<std::size_t> order(shard.columns.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), w.rng());
  const std::size_t dim = model.rank;
  Value grad_u(dim), grad_v(dim), delta(dim);
  if (!order.empty()) {
    const Key first = model.col_key(shard.columns[order[0]]);
    w.localize_hint(std::span<const Key>(&first, 1));
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i + 1 < order.size()) {
      const Key next = model.col_key(shard.columns[order[i + 1]]);
      w.localize_hint(std::span<const Key>(&next, 1));
    }
    const std::uint32_t col = shard.columns[order[i]];
    for (const Cell& c : shard.cells[order[i]]) {
      const Key rk = model.row_key(c.row);
      const Key ck = model.col_key(col);
      ValueBlock vals = co_await w.pull({rk, ck});
      mf_cell_gradient(vals.row(0), vals.row(1), c.rating, opts.regularization, grad_u, grad_v);
      for (std::size_t j = 0; j < dim; ++j) delta[j] = static_cast<Scalar>(-opts.learning_rate * grad_u[j]);
      w.push(rk, delta);
      for (std::size_t j = 0; j < dim; ++j) delta[j] = static_cast<Scalar>(-opts.learning_rate * grad_v[j]);
      w.push(ck, delta);
      co_await w.compute(opts.compute_per_cell);
    }
  }
}

double mf_rmse(const std::vector<Cell>& cells, const MfModel& model, const std::function<Value(Key)>& lookup) {
  if (cells.empty()) return 0.0;
  std::vector<Value> rows(model.rows), cols(model.cols);
  double sq = 0.0;
  for (const Cell& c : cells) {
    if (rows[c.row].empty()) rows[c.row] = lookup(model.row_key(c.row));
    if (cols[c.col].empty()) cols[c.col] = lookup(model.col_key(c.col));
    const double err = c.rating - dot(rows[c.row], cols[c.col]);
    sq += err * err;
  }
  return std::sqrt(sq / static_cast<double>(cells.size()));
}

}  // namespace nups
