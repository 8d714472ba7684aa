#include "nups/workloads/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "nups/core/random.hpp"
#include "nups/ps/worker.hpp"
#include "nups/workloads/zipf.hpp"

namespace nups {
namespace {

constexpr char kMagic[9] = "NUPSEM01";

double dot(std::span<const Scalar> a, std::span<const Scalar> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// Numerically stable log(1 + exp(x)).
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

EmbeddingDataset generate_embedding_dataset(const EmbeddingDatasetConfig& cfg) {
  if (cfg.entities < 2 || cfg.groups == 0 || cfg.groups > cfg.entities) {
    throw InvalidInput("embedding dataset: need at least 2 entities and 1..entities groups");
  }
  if (cfg.pairs == 0) throw InvalidInput("embedding dataset: no pairs");
  if (cfg.holdout < 0.0 || cfg.holdout >= 1.0) throw InvalidInput("embedding dataset: holdout must be in [0, 1)");
  const ZipfSampler dist(cfg.entities, cfg.zipf, mix_seed(cfg.seed, 11));
  std::mt19937_64 rng(mix_seed(cfg.seed, 12));
  // Group g holds the entities e with e % groups == g.
  auto group = [&](std::uint32_t e) { return e % cfg.groups; };
  std::vector<EntityPair> pairs;
  pairs.reserve(cfg.pairs);
  while (pairs.size() < cfg.pairs) {
    const auto h = static_cast<std::uint32_t>(dist(rng));
    std::uint32_t t = h;
    for (int tries = 0; tries < 1000 && (t == h || group(t) != group(h)); ++tries) {
      t = static_cast<std::uint32_t>(dist(rng));
    }
    if (t == h || group(t) != group(h)) continue;
    pairs.push_back({h, t});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.holdout * static_cast<double>(pairs.size())));
  EmbeddingDataset d;
  d.config = cfg;
  d.test.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_test));
  d.train.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_test), pairs.end());
  std::uniform_int_distribution<std::uint32_t> any(0, cfg.entities - 1);
  d.test_negatives.resize(n_test * cfg.test_negatives);
  for (auto& n : d.test_negatives) n = any(rng);
  return d;
}

void save_embedding_dataset(const EmbeddingDataset& d, const std::string& path) {
  detail::BinaryWriter w(path);
  w.magic(kMagic);
  const auto& c = d.config;
  w.put(c.entities);
  w.put(c.groups);
  w.put(c.test_negatives);
  w.put(c.zipf);
  w.put(c.holdout);
  w.put(c.seed);
  w.put(c.pairs);
  w.put(static_cast<std::uint64_t>(d.train.size()));
  w.put(static_cast<std::uint64_t>(d.test.size()));
  for (const auto* part : {&d.train, &d.test}) {
    for (const EntityPair& p : *part) {
      w.put(p.head);
      w.put(p.tail);
    }
  }
  for (std::uint32_t n : d.test_negatives) w.put(n);
  w.finish(path);
}

EmbeddingDataset load_embedding_dataset(const std::string& path) {
  detail::BinaryReader r(path);
  r.expect_magic(kMagic);
  EmbeddingDataset d;
  auto& c = d.config;
  c.entities = r.get<std::uint32_t>();
  c.groups = r.get<std::uint32_t>();
  c.test_negatives = r.get<std::uint32_t>();
  c.zipf = r.get<double>();
  c.holdout = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.pairs = r.get<std::uint64_t>();
  const auto n_train = r.get<std::uint64_t>();
  const auto n_test = r.get<std::uint64_t>();
  if (n_train + n_test != c.pairs) throw InvalidInput(path + ": pair counts do not add up");
  auto entity = [&] {
    const auto e = r.get<std::uint32_t>();
    if (e >= c.entities) throw InvalidInput(path + ": entity out of range");
    return e;
  };
  for (auto [part, n] : {std::pair{&d.train, n_train}, std::pair{&d.test, n_test}}) {
    part->reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto h = entity();
      const auto t = entity();
      part->push_back({h, t});
    }
  }
  d.test_negatives.resize(n_test * c.test_negatives);
  for (auto& n : d.test_negatives) n = entity();
  return d;
}

NegativeDistribution parse_negative_distribution(std::string_view text) {
  std::string t;
  for (char ch : text) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "uniform") return NegativeDistribution::Uniform;
  if (t == "frequency") return NegativeDistribution::Frequency;
  throw InvalidInput("unknown negative distribution '" + std::string(text) + "'");
}

TargetDistribution negative_distribution(const EmbeddingDataset& d, NegativeDistribution kind,
                                         ConformityLevel level) {
  std::vector<double> pi(d.config.entities, 0.0);
  if (kind == NegativeDistribution::Uniform) {
    std::fill(pi.begin(), pi.end(), 1.0 / static_cast<double>(pi.size()));
  } else {
    for (const auto& p : d.train) pi[p.tail] += 1.0;
    double total = 0.0;
    for (double x : pi) total += x;
    if (total == 0.0) throw InvalidInput("negative distribution: no training tails");
    for (auto& x : pi) x /= total;
  }
  return TargetDistribution::over_keys(pi, level);
}

double logistic_loss(double score, bool positive) { return softplus(positive ? -score : score); }

double logistic_loss_derivative(double score, bool positive) {
  return positive ? sigmoid(score) - 1.0 : sigmoid(score);
}

double embedding_pair_loss(std::span<const Scalar> head, std::span<const Scalar> tail, const ValueBlock& negatives) {
  double loss = logistic_loss(dot(head, tail), true);
  for (std::size_t i = 0; i < negatives.size(); ++i) loss += logistic_loss(dot(head, negatives.row(i)), false);
  return loss;
}

void embedding_pair_gradient(std::span<const Scalar> head, std::span<const Scalar> tail, const ValueBlock& negatives,
                             std::span<Scalar> grad_head, std::span<Scalar> grad_tail, ValueBlock& grad_negatives) {
  const std::size_t dim = head.size();
  const double gp = logistic_loss_derivative(dot(head, tail), true);
  for (std::size_t j = 0; j < dim; ++j) {
    grad_head[j] = static_cast<Scalar>(gp * tail[j]);
    grad_tail[j] = static_cast<Scalar>(gp * head[j]);
  }
  grad_negatives = ValueBlock(negatives.size(), dim);
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const auto n = negatives.row(i);
    const double gn = logistic_loss_derivative(dot(head, n), false);
    auto gr = grad_negatives.row(i);
    for (std::size_t j = 0; j < dim; ++j) {
      grad_head[j] += static_cast<Scalar>(gn * n[j]);
      gr[j] = static_cast<Scalar>(gn * head[j]);
    }
  }
}

Initializer embedding_initializer(std::uint32_t dim, double scale, std::uint64_t seed) {
  return [dim, scale, seed](Key k) {
    std::mt19937_64 rng(mix_seed(seed, k));
    std::uniform_real_distribution<double> u(-scale, scale);
    Value v(dim);
    for (auto& x : v) x = static_cast<Scalar>(u(rng));
    return v;
  };
}

std::vector<std::uint64_t> embedding_access_counts(const EmbeddingDataset& d, const TargetDistribution& pi,
                                                   std::uint32_t negatives) {
  std::vector<std::uint64_t> counts(d.config.entities, 0);
  for (const auto& p : d.train) {
    ++counts[p.head];
    ++counts[p.tail];
  }
  const double draws = static_cast<double>(negatives) * static_cast<double>(d.train.size());
  for (std::size_t i = 0; i < pi.support().size(); ++i) {
    counts[pi.support()[i]] += static_cast<std::uint64_t>(std::llround(draws * pi.probabilities()[i]));
  }
  return counts;
}

std::vector<EmbeddingShard> partition_embedding(const EmbeddingDataset& d, std::uint32_t nodes,
                                                std::uint32_t workers_per_node) {
  if (nodes == 0 || workers_per_node == 0) throw InvalidInput("partition_embedding: need at least one worker");
  std::vector<EmbeddingShard> shards(std::size_t{nodes} * workers_per_node);
  std::vector<std::uint64_t> next(nodes, 0);
  for (const auto& p : d.train) {
    const auto q = static_cast<std::uint32_t>(std::uint64_t{p.head} * nodes / d.config.entities);
    const auto w = static_cast<std::uint32_t>(next[q]++ % workers_per_node);
    shards[std::size_t{q} * workers_per_node + w].pairs.push_back(p);
  }
  for (auto& s : shards) {
    for (const auto& p : s.pairs) s.heads.push_back(p.head);
    std::sort(s.heads.begin(), s.heads.end());
    s.heads.erase(std::unique(s.heads.begin(), s.heads.end()), s.heads.end());
  }
  return shards;
}

Task<void> embedding_worker_epoch(WorkerContext& w, const EmbeddingShard& shard, DistributionId negatives,
                                  const EmbeddingOptions& opts) {
  const std::size_t dim = opts.dim;
  Value grad_h(dim), grad_t(dim), delta(dim);
  ValueBlock grad_n;
  SampleHandle next;
  if (opts.negatives > 0 && !shard.pairs.empty()) next = w.prepare_sample(negatives, opts.negatives);
  for (std::size_t i = 0; i < shard.pairs.size(); ++i) {
    const EntityPair p = shard.pairs[i];
    SampleHandle current = std::move(next);
    if (opts.negatives > 0 && i + 1 < shard.pairs.size()) next = w.prepare_sample(negatives, opts.negatives);
    ValueBlock pos = co_await w.pull({p.head, p.tail});
    SampleBatch neg;
    if (opts.negatives > 0) {
      neg = co_await w.pull_sample(current);
    } else {
      neg.values = ValueBlock(0, dim);
    }
    embedding_pair_gradient(pos.row(0), pos.row(1), neg.values, grad_h, grad_t, grad_n);
    for (std::size_t j = 0; j < dim; ++j) delta[j] = static_cast<Scalar>(-opts.learning_rate * grad_h[j]);
    w.push(p.head, delta);
    for (std::size_t j = 0; j < dim; ++j) delta[j] = static_cast<Scalar>(-opts.learning_rate * grad_t[j]);
    w.push(p.tail, delta);
    for (std::size_t n = 0; n < neg.keys.size(); ++n) {
      for (std::size_t j = 0; j < dim; ++j) delta[j] = static_cast<Scalar>(-opts.learning_rate * grad_n.row(n)[j]);
      w.push(neg.keys[n], delta, Cause::Sampling);
    }
    co_await w.compute(opts.compute_per_pair);
  }
}

double embedding_test_loss(const EmbeddingDataset& d, const std::function<Value(Key)>& lookup) {
  if (d.test.empty()) return 0.0;
  const std::uint32_t m = d.config.test_negatives;
  double total = 0.0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const Value h = lookup(d.test[i].head);
    const Value t = lookup(d.test[i].tail);
    ValueBlock neg(m, h.size());
    for (std::uint32_t j = 0; j < m; ++j) {
      const Value n = lookup(d.test_negatives[i * m + j]);
      std::copy(n.begin(), n.end(), neg.row(j).begin());
    }
    total += embedding_pair_loss(h, t, neg);
  }
  return total / static_cast<double>(d.test.size());
}

}  // namespace nups
