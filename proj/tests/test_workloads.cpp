#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <fstream>
#include <random>
#include <unistd.h>
#include <set>

#include "doctest.h"
#include "nups/core/techniques.hpp"
#include "nups/ps/cluster.hpp"
#include "nups/workloads/embedding.hpp"
#include "nups/workloads/matrix.hpp"
#include "nups/workloads/zipf.hpp"

using namespace nups;

namespace {

std::vector<Scalar> random_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<Scalar> v(n);
  for (auto& x : v) x = static_cast<Scalar>(d(rng));
  return v;
}

bool close_relative(double numeric, double analytic, double tol) {
  return std::abs(numeric - analytic) <= tol * std::max({1.0, std::abs(numeric), std::abs(analytic)});
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nups_" + std::to_string(::getpid()) + "_" + name);
}

// Least-squares slope of log count over log rank, ranks 1..top.
double log_log_slope(std::vector<std::uint64_t> counts, std::size_t top) {
  std::sort(counts.rbegin(), counts.rend());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < top && counts[r] > 0; ++r, ++n) {
    const double x = std::log(static_cast<double>(r + 1));
    const double y = std::log(static_cast<double>(counts[r]));
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("zipf sampler matches its rank probabilities") {
  ZipfSampler z(10'000, 1.1, 3);
  // Oracle: r^-s normalized by the harmonic sum, computed directly.
  double h = 0;
  for (int r = 1; r <= 10'000; ++r) h += std::pow(r, -1.1);
  for (std::size_t r : {0u, 1u, 9u, 999u}) {
    CHECK(z.probability(z.item_of_rank(r)) == doctest::Approx(std::pow(r + 1.0, -1.1) / h).epsilon(1e-12));
  }
  std::mt19937_64 rng(5);
  std::vector<std::uint64_t> counts(z.size());
  for (int i = 0; i < 1'000'000; ++i) ++counts[z(rng)];
  const double slope = log_log_slope(counts, 100);
  CHECK(slope >= -1.25);
  CHECK(slope <= -0.95);

  ZipfSampler flat(50, 0.0, 1);
  for (std::size_t i = 0; i < 50; ++i) CHECK(flat.probability(i) == doctest::Approx(0.02));
  std::set<std::size_t> ids;
  for (std::size_t r = 0; r < 50; ++r) ids.insert(flat.item_of_rank(r));
  CHECK(ids.size() == 50);
}

TEST_CASE("matrix factorization gradient matches central differences") {
  std::mt19937_64 rng(11);
  const double lambda = 0.03, h = 1e-6;
  int points = 0;
  for (int trial = 0; trial < 100; ++trial, ++points) {
    const std::size_t rank = 1 + trial % 8;
    auto u = random_vector(rng, rank, 0.7), v = random_vector(rng, rank, 0.7);
    const double rating = std::normal_distribution<double>(0, 2)(rng);
    std::vector<Scalar> gu(rank), gv(rank);
    mf_cell_gradient(u, v, rating, lambda, gu, gv);
    for (std::size_t i = 0; i < rank; ++i) {
      for (auto* x : {&u, &v}) {
        const Scalar saved = (*x)[i];
        (*x)[i] = saved + h;
        const double plus = mf_cell_loss(u, v, rating, lambda);
        (*x)[i] = saved - h;
        const double minus = mf_cell_loss(u, v, rating, lambda);
        (*x)[i] = saved;
        const double numeric = (plus - minus) / (2 * h);
        const double analytic = x == &u ? gu[i] : gv[i];
        CHECK(close_relative(numeric, analytic, 1e-5));
      }
    }
  }
  CHECK(points == 100);
}

TEST_CASE("embedding gradient matches central differences") {
  std::mt19937_64 rng(12);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + trial % 6, nneg = trial % 4;
    auto head = random_vector(rng, dim, 0.8), tail = random_vector(rng, dim, 0.8);
    ValueBlock neg(nneg, dim);
    for (auto& x : neg.flat()) x = static_cast<Scalar>(std::normal_distribution<double>(0, 0.8)(rng));
    std::vector<Scalar> gh(dim), gt(dim);
    ValueBlock gn(nneg, dim);
    embedding_pair_gradient(head, tail, neg, gh, gt, gn);

    auto probe = [&](Scalar& x, double analytic) {
      const Scalar saved = x;
      x = saved + h;
      const double plus = embedding_pair_loss(head, tail, neg);
      x = saved - h;
      const double minus = embedding_pair_loss(head, tail, neg);
      x = saved;
      CHECK(close_relative((plus - minus) / (2 * h), analytic, 1e-5));
    };
    for (std::size_t i = 0; i < dim; ++i) {
      probe(head[i], gh[i]);
      probe(tail[i], gt[i]);
      for (std::size_t n = 0; n < nneg; ++n) probe(neg.row(n)[i], gn.row(n)[i]);
    }
  }
}

TEST_CASE("logistic loss is stable for large scores") {
  CHECK(logistic_loss(0.0, true) == doctest::Approx(std::log(2.0)));
  CHECK(logistic_loss(800.0, true) == doctest::Approx(0.0));
  CHECK(logistic_loss(-800.0, true) == doctest::Approx(800.0));
  CHECK(logistic_loss(800.0, false) == doctest::Approx(800.0));
  CHECK(std::isfinite(logistic_loss_derivative(-800.0, true)));
  CHECK(logistic_loss_derivative(-800.0, true) == doctest::Approx(-1.0));
}

TEST_CASE("matrix dataset is deterministic, distinct and round-trips") {
  MatrixDatasetConfig cfg;
  cfg.rows = 120;
  cfg.cols = 90;
  cfg.cells = 3000;
  cfg.rank = 3;
  cfg.seed = 9;
  const auto a = generate_matrix_dataset(cfg);
  const auto b = generate_matrix_dataset(cfg);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.test.size() == 3000);
  CHECK(a.test.size() == 150);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto* part : {&a.train, &a.test}) {
    for (const auto& c : *part) {
      CHECK(c.row < 120);
      CHECK(c.col < 90);
      CHECK(seen.insert({c.row, c.col}).second);
    }
  }
  cfg.seed = 10;
  CHECK(generate_matrix_dataset(cfg).train != a.train);

  const auto path = temp_file("mf.bin");
  save_matrix_dataset(a, path.string());
  const auto c = load_matrix_dataset(path.string());
  std::filesystem::remove(path);
  CHECK(c.train == a.train);
  CHECK(c.test == a.test);
  CHECK(c.config.rows == 120);
  CHECK(c.config.seed == 9);

  cfg.cells = 120 * 90 + 1;
  CHECK_THROWS_AS(generate_matrix_dataset(cfg), InvalidInput);
}

TEST_CASE("loading a file of the wrong kind fails") {
  const auto path = temp_file("garbage.bin");
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTADATASET.......";
  }
  CHECK_THROWS_AS(load_matrix_dataset(path.string()), InvalidInput);
  CHECK_THROWS_AS(load_embedding_dataset(path.string()), InvalidInput);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_matrix_dataset(path.string()), InvalidInput);
}

TEST_CASE("mf partition covers every training cell once") {
  MatrixDatasetConfig cfg;
  cfg.rows = 200;
  cfg.cols = 150;
  cfg.cells = 4000;
  const auto d = generate_matrix_dataset(cfg);
  const auto shards = partition_mf(d, 4, 3);
  REQUIRE(shards.size() == 12);
  std::multiset<std::pair<std::uint32_t, std::uint32_t>> got;
  for (std::size_t s = 0; s < shards.size(); ++s) {
    const auto& sh = shards[s];
    const std::uint32_t q = static_cast<std::uint32_t>(s / 3), w = static_cast<std::uint32_t>(s % 3);
    std::uint64_t n = 0;
    std::set<std::uint32_t> rows;
    for (std::size_t i = 0; i < sh.columns.size(); ++i) {
      CHECK(sh.columns[i] % 3 == w);
      for (const auto& c : sh.cells[i]) {
        CHECK(c.col == sh.columns[i]);
        CHECK(std::uint64_t{c.row} * 4 / 200 == q);
        got.insert({c.row, c.col});
        rows.insert(c.row);
        ++n;
      }
    }
    CHECK(n == sh.num_cells);
    CHECK(std::set<std::uint32_t>(sh.rows.begin(), sh.rows.end()) == rows);
  }
  std::multiset<std::pair<std::uint32_t, std::uint32_t>> want;
  for (const auto& c : d.train) want.insert({c.row, c.col});
  CHECK(got == want);

  const auto counts = mf_access_counts(d);
  CHECK(counts.size() == 350);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == 2 * d.train.size());
}

TEST_CASE("embedding dataset stays within groups and round-trips") {
  EmbeddingDatasetConfig cfg;
  cfg.entities = 300;
  cfg.pairs = 5000;
  cfg.groups = 10;
  cfg.seed = 4;
  const auto a = generate_embedding_dataset(cfg);
  CHECK(a.train == generate_embedding_dataset(cfg).train);
  CHECK(a.train.size() + a.test.size() == 5000);
  CHECK(a.test_negatives.size() == a.test.size() * cfg.test_negatives);
  for (const auto& p : a.train) {
    CHECK(p.head != p.tail);
    CHECK(p.head % 10 == p.tail % 10);
  }
  const auto path = temp_file("embed.bin");
  save_embedding_dataset(a, path.string());
  const auto b = load_embedding_dataset(path.string());
  std::filesystem::remove(path);
  CHECK(b.train == a.train);
  CHECK(b.test == a.test);
  CHECK(b.test_negatives == a.test_negatives);

  const auto uni = negative_distribution(a, NegativeDistribution::Uniform, ConformityLevel{});
  for (Key k = 0; k < 300; ++k) CHECK(uni.probability(k) == doctest::Approx(1.0 / 300));
  const auto freq = negative_distribution(a, NegativeDistribution::Frequency, ConformityLevel{});
  std::vector<double> tails(300, 0.0);
  for (const auto& p : a.train) tails[p.tail] += 1.0;
  for (Key k = 0; k < 300; ++k) {
    CHECK(freq.probability(k) == doctest::Approx(tails[k] / static_cast<double>(a.train.size())));
  }
  CHECK(parse_negative_distribution("frequency") == NegativeDistribution::Frequency);
  CHECK_THROWS_AS(parse_negative_distribution("zipf"), InvalidInput);

  const auto counts = embedding_access_counts(a, uni, 3);
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  // Per-key rounding of the expected draws moves the total by at most 1/2 per key.
  CHECK(std::abs(total - 5.0 * static_cast<double>(a.train.size())) <= 0.5 * 300);
}

namespace {

ClusterOptions mf_cluster(const MfModel& model, const MfOptions& opts, std::uint32_t nodes, std::uint32_t workers) {
  ClusterOptions o;
  o.config.num_nodes = nodes;
  o.config.workers_per_node = workers;
  o.config.num_keys = model.num_keys();
  o.config.value_dim = model.rank;
  o.config.staleness_interval = kNever;
  o.techniques = assign_all(model.num_keys(), Technique::Relocated);
  o.init = mf_initializer(model.rank, opts.init_scale, 3);
  return o;
}

double train_mf(const MatrixDataset& d, const MfOptions& opts, std::uint32_t nodes, std::uint32_t workers, int epochs,
                MessageStats* stats = nullptr) {
  const MfModel model{d.config.rows, d.config.cols, opts.rank};
  Cluster c(mf_cluster(model, opts, nodes, workers));
  const auto shards = partition_mf(d, nodes, workers);
  for (int e = 0; e < epochs; ++e) {
    c.run_workers([&](WorkerContext& w) {
      return mf_worker_epoch(w, model, shards[w.node_id() * workers + w.worker_index()], opts);
    });
    c.quiesce();
  }
  if (stats) *stats = c.message_stats();
  return mf_rmse(d.test, model, [&](Key k) { return c.model_value(k, 0); });
}

}  // namespace

TEST_CASE("mf training on a rank-2 matrix reduces held-out error") {
  MatrixDatasetConfig cfg;
  cfg.rows = 60;
  cfg.cols = 60;
  cfg.cells = 2000;
  cfg.rank = 2;
  cfg.zipf = 0.0;
  cfg.noise = 0.01;
  const auto d = generate_matrix_dataset(cfg);
  MfOptions opts;
  opts.rank = 2;
  opts.learning_rate = 0.05;
  opts.regularization = 0.001;
  opts.init_scale = 0.3;
  const double before = train_mf(d, opts, 1, 1, 0);
  const double after = train_mf(d, opts, 1, 1, 40);
  MESSAGE("rmse ", before, " -> ", after);
  CHECK(after < 0.5 * before);

  opts.learning_rate = 0.0;
  CHECK(train_mf(d, opts, 2, 2, 3) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("mf epoch touches each training cell's keys exactly once per cell") {
  MatrixDatasetConfig cfg;
  cfg.rows = 40;
  cfg.cols = 30;
  cfg.cells = 600;
  const auto d = generate_matrix_dataset(cfg);
  MfOptions opts;
  opts.rank = 2;
  const MfModel model{40, 30, 2};
  Cluster c(mf_cluster(model, opts, 2, 2));
  const auto shards = partition_mf(d, 2, 2);
  c.run_workers([&](WorkerContext& w) {
    return mf_worker_epoch(w, model, shards[w.node_id() * 2 + w.worker_index()], opts);
  });
  c.quiesce();
  std::vector<std::uint64_t> seen(model.num_keys(), 0);
  for (NodeId q = 0; q < 2; ++q) {
    const auto a = c.node(q).access_counts();
    for (Key k = 0; k < model.num_keys(); ++k) {
      seen[k] += a.direct[k];
      CHECK(a.sampling[k] == 0);
    }
  }
  // Each cell pulls its row and column once and pushes each once.
  const auto expected = mf_access_counts(d);
  for (Key k = 0; k < model.num_keys(); ++k) CHECK(seen[k] == 2 * expected[k]);
}

TEST_CASE("embedding epoch draws negatives through the sampling api") {
  EmbeddingDatasetConfig cfg;
  cfg.entities = 80;
  cfg.pairs = 400;
  const auto d = generate_embedding_dataset(cfg);
  for (std::uint32_t negatives : {0u, 3u}) {
    EmbeddingOptions opts;
    opts.dim = 4;
    opts.negatives = negatives;
    ClusterOptions o;
    o.config.num_nodes = 2;
    o.config.workers_per_node = 2;
    o.config.num_keys = 80;
    o.config.value_dim = 4;
    o.config.staleness_interval = kNever;
    o.techniques = assign_all(80, Technique::Relocated);
    o.init = embedding_initializer(4, 0.1, 1);
    Cluster c(o);
    const auto dist = c.register_distribution(negative_distribution(d, NegativeDistribution::Uniform, ConformityLevel{}));
    const auto shards = partition_embedding(d, 2, 2);
    std::uint64_t pairs = 0;
    for (const auto& s : shards) pairs += s.pairs.size();
    CHECK(pairs == d.train.size());
    const double before = embedding_test_loss(d, [&](Key k) { return c.model_value(k, 0); });
    c.run_workers([&](WorkerContext& w) {
      return embedding_worker_epoch(w, shards[w.node_id() * 2 + w.worker_index()], dist, opts);
    });
    c.quiesce();
    std::uint64_t sampled = 0;
    for (NodeId q = 0; q < 2; ++q) {
      const auto a = c.node(q).access_counts();
      sampled = std::accumulate(a.sampling.begin(), a.sampling.end(), sampled);
    }
    // Each negative is pulled once and pushed once.
    CHECK(sampled == 2 * negatives * d.train.size());
    CHECK(c.sampling_stats().delivered == negatives * d.train.size());
    if (negatives == 0) CHECK(c.message_stats().cause(Cause::Sampling) == 0);
    const double after = embedding_test_loss(d, [&](Key k) { return c.model_value(k, 0); });
    CHECK(std::isfinite(after));
    if (negatives > 0) CHECK(after < before);
  }
}
