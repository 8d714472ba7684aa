#include "nups/harness/conformity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "nups/core/random.hpp"
#include "nups/core/techniques.hpp"
#include "nups/ps/cluster.hpp"
#include "nups/sampling/pool.hpp"
#include "nups/sampling/statistics.hpp"

namespace nups {
namespace {

std::vector<double> harmonic_pi(std::uint32_t n) {
  std::vector<double> pi(n);
  double total = 0.0;
  for (std::uint32_t k = 0; k < n; ++k) total += pi[k] = 1.0 / (k + 1.0);
  for (auto& p : pi) p /= total;
  return pi;
}

ConformityCheck fraction_check(std::string name, std::uint32_t passed, std::uint32_t total, double required,
                               std::string detail = {}) {
  ConformityCheck c;
  c.name = std::move(name);
  c.value = total ? static_cast<double>(passed) / total : 0.0;
  c.limit = required;
  c.pass = total > 0 && c.value >= required;
  std::ostringstream d;
  d << passed << "/" << total << " seeds";
  if (!detail.empty()) d << ", " << detail;
  c.detail = d.str();
  return c;
}

ConformityCheck bound_check(std::string name, double value, double limit, bool pass, std::string detail = {}) {
  return {std::move(name), pass, value, limit, std::move(detail)};
}

void run_l1(const BatteryOptions& o, ConformityReport& r) {
  const auto pi = harmonic_pi(o.keys);
  const auto dist = TargetDistribution::over_keys(pi, o.level);
  std::uint32_t fit = 0;
  std::uint32_t repeats_ok = 0;
  double worst_z = 0.0;
  std::vector<Key> seq(o.draws);
  for (std::uint32_t s = 0; s < o.seeds; ++s) {
    std::mt19937_64 rng(mix_seed(o.seed, s));
    std::vector<double> counts(o.keys, 0.0);
    for (auto& k : seq) {
      k = dist.draw(rng);
      counts[k] += 1.0;
    }
    fit += chi_squared_gof(counts, pi, o.confidence).pass;
    bool ok = true;
    for (std::uint32_t lag = 1; lag <= 5; ++lag) {
      const auto rr = repeat_rate_test(seq, lag, pi);
      worst_z = std::max(worst_z, std::abs(rr.z));
      ok = ok && rr.pass;
    }
    repeats_ok += ok;
  }
  r.checks.push_back(fraction_check("L1 chi-squared fit", fit, o.seeds, o.pass_fraction));
  std::ostringstream d;
  d << "max |z| " << worst_z;
  r.checks.push_back(fraction_check("L1 repeat rate at lags 1-5", repeats_ok, o.seeds, o.pass_fraction, d.str()));
}

void run_l2(const BatteryOptions& o, ConformityReport& r) {
  const auto pi = harmonic_pi(o.keys);
  const auto dist = TargetDistribution::over_keys(pi, o.level);
  const auto choice = choose_scheme(o.level, o.pool_size, o.use_frequency);
  const std::uint32_t g = choice.pool_size, u = o.use_frequency;
  const std::uint64_t window = std::uint64_t{u} * g;
  if (choice.kind != SchemeKind::PooledReuse) {
    r.checks.push_back(bound_check("L2 scheme is pooled reuse", 0, 0, false, std::string(to_string(choice.kind))));
    return;
  }
  // Each fresh draw is used exactly U times within its pool, so counts / U are
  // the counts of the fresh draws when the stream ends on a pool boundary.
  const std::uint64_t m = o.draws - o.draws % window;
  std::uint32_t fit = 0, raw_fit = 0, exact = 0;
  std::uint64_t max_distance = 0;
  std::vector<Key> seq;
  seq.reserve(m);
  for (std::uint32_t s = 0; s < o.seeds; ++s) {
    std::mt19937_64 rng(mix_seed(o.seed, 1000 + s));
    PoolStream stream(g, u, rng());
    std::vector<std::vector<Key>> pools;
    stream.set_observer([&](const std::vector<Key>& fresh, const std::vector<Key>&) { pools.push_back(fresh); });
    seq.clear();
    while (seq.size() < m) {
      const std::size_t n = std::min<std::uint64_t>(1 + rng() % 97, m - seq.size());
      const auto part = stream.take(n, dist);
      seq.insert(seq.end(), part.begin(), part.end());
    }
    std::vector<double> counts(o.keys, 0.0);
    for (Key k : seq) counts[k] += 1.0;
    raw_fit += chi_squared_gof(counts, pi, o.confidence).pass;
    for (auto& c : counts) c /= u;
    fit += chi_squared_gof(counts, pi, o.confidence).pass;

    bool seed_exact = true;
    std::vector<std::int64_t> uses(o.keys), first(o.keys), last(o.keys);
    for (std::uint64_t p = 0; p * window < m; ++p) {
      std::fill(uses.begin(), uses.end(), 0);
      std::fill(first.begin(), first.end(), -1);
      for (Key k : pools.at(p)) uses[k] += u;
      for (std::uint64_t i = p * window; i < (p + 1) * window; ++i) {
        const Key k = seq[i];
        --uses[k];
        if (first[k] < 0) first[k] = static_cast<std::int64_t>(i);
        last[k] = static_cast<std::int64_t>(i);
      }
      for (std::uint32_t k = 0; k < o.keys; ++k) {
        seed_exact = seed_exact && uses[k] == 0;
        if (first[k] >= 0) max_distance = std::max<std::uint64_t>(max_distance, last[k] - first[k]);
      }
    }
    exact += seed_exact;
  }
  std::ostringstream d;
  d << "G=" << g << " U=" << u << ", raw counts pass " << raw_fit << "/" << o.seeds;
  r.checks.push_back(fraction_check("L2 chi-squared fit of counts/U", fit, o.seeds, o.pass_fraction, d.str()));
  r.checks.push_back(fraction_check("L2 every fresh draw used exactly U times", exact, o.seeds, 1.0));
  r.checks.push_back(bound_check("L2 max dependency distance", static_cast<double>(max_distance),
                                 static_cast<double>(window), max_distance <= window, "limit U*G"));
}

ClusterOptions sampling_cluster(const BatteryOptions& o, std::uint32_t seed) {
  ClusterOptions c;
  c.config.num_nodes = o.nodes;
  c.config.workers_per_node = 1;
  c.config.num_keys = o.keys;
  c.config.value_dim = 1;
  c.config.staleness_interval = kNever;
  c.config.rng_seed = seed;
  c.network.jitter = Micros{200};
  c.network.seed = seed;
  c.init = [](Key k) { return Value{static_cast<Scalar>(k)}; };
  return c;
}

void run_l3(const BatteryOptions& o, ConformityReport& r) {
  const auto pi = harmonic_pi(o.keys);
  // Small pools so that each node's consumption ends on a pool boundary.
  const std::uint32_t g = 25, u = 4, n = 50;
  std::uint32_t multisets_ok = 0, fit = 0, values_ok = 0;
  std::uint64_t handles = 0, postponed = 0;
  for (std::uint32_t s = 0; s < o.cluster_seeds; ++s) {
    auto opts = sampling_cluster(o, static_cast<std::uint32_t>(mix_seed(o.seed, 2000 + s)));
    opts.config.pool_size = g;
    opts.config.use_frequency = u;
    Cluster c(opts);
    const auto id = c.register_distribution(TargetDistribution::over_keys(pi, o.level));
    std::vector<double> counts(o.keys, 0.0);
    bool all_match = true, values_match = true;
    c.run_workers([&](WorkerContext& w) -> Task<void> {
      for (std::uint32_t i = 0; i < o.handles_per_node; ++i) {
        auto h = w.prepare_sample(id, n);
        std::multiset<Key> expected(h.prepared_keys().begin(), h.prepared_keys().end());
        std::multiset<Key> got;
        std::size_t part = 1 + i % 7;
        while (h.remaining() > 0) {
          auto b = co_await w.pull_sample(h, std::min(part, h.remaining()));
          for (std::size_t j = 0; j < b.keys.size(); ++j) {
            got.insert(b.keys[j]);
            counts[b.keys[j]] += 1.0;
            values_match = values_match && b.values.row(j)[0] == static_cast<Scalar>(b.keys[j]);
          }
          part += 5;
        }
        all_match = all_match && got == expected;
        ++handles;
        postponed += h.postponements();
        co_await w.compute(Micros{300});
      }
    });
    multisets_ok += all_match;
    values_ok += values_match;
    for (auto& x : counts) x /= u;
    fit += chi_squared_gof(counts, pi, o.confidence).pass;
  }
  std::ostringstream d;
  d << handles << " handles, " << postponed << " postponed samples";
  r.checks.push_back(fraction_check("L3 per-handle multisets", multisets_ok, o.cluster_seeds, 1.0, d.str()));
  r.checks.push_back(fraction_check("L3 delivered values match keys", values_ok, o.cluster_seeds, 1.0));
  r.checks.push_back(fraction_check("L3 long-run chi-squared fit", fit, o.cluster_seeds, 0.9));
}

void run_l4(const BatteryOptions& o, ConformityReport& r) {
  // Key 0 is hot (pi_0 = 1/2 > 1/Q) and stays at its home node 0.
  std::vector<double> pi(o.keys, 0.5 / (o.keys - 1));
  pi[0] = 0.5;
  auto opts = sampling_cluster(o, static_cast<std::uint32_t>(mix_seed(o.seed, 3000)));
  Cluster c(opts);
  const auto id = c.register_distribution(TargetDistribution::over_keys(pi, o.level));
  const MessageStats before = c.message_stats();
  std::vector<double> counts(o.keys, 0.0);
  std::vector<std::uint64_t> hot_at(o.nodes, 0), total_at(o.nodes, 0);
  c.run_workers([&](WorkerContext& w) -> Task<void> {
    for (std::uint32_t i = 0; i < o.handles_per_node; ++i) {
      auto h = w.prepare_sample(id, 200);
      auto b = co_await w.pull_sample(h);
      for (Key k : b.keys) {
        counts[k] += 1.0;
        hot_at[w.node_id()] += k == 0;
        ++total_at[w.node_id()];
      }
    }
  });
  const double samples = static_cast<double>(o.nodes) * o.handles_per_node * 200;
  const double freq = counts[0] / samples;
  const auto gof = chi_squared_gof(counts, pi, o.confidence);
  std::ostringstream d;
  d << "pi_0=0.5, chi2 " << gof.statistic << " vs " << gof.critical;
  // The check passes when the scheme is detected as non-conforming to pi.
  r.checks.push_back(bound_check("L4 hot-key frequency bounded by 1/Q (test rejects pi)", freq, 1.0 / o.nodes,
                                 freq <= 1.0 / o.nodes + 1e-12 && !gof.pass, d.str()));
  std::uint64_t elsewhere = 0;
  for (NodeId q = 1; q < o.nodes; ++q) elsewhere += hot_at[q];
  r.checks.push_back(bound_check("L4 hot key never sampled off its node", static_cast<double>(elsewhere), 0,
                                 elsewhere == 0));
  const auto sent = (c.message_stats() - before).total;
  r.checks.push_back(bound_check("L4 sends no messages", static_cast<double>(sent), 0, sent == 0));
}

}  // namespace

bool ConformityReport::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

ConformityReport run_conformity_battery(const BatteryOptions& options) {
  if (options.keys < 2) throw InvalidInput("conformity battery needs at least two keys");
  if (options.seeds == 0 || options.draws == 0) throw InvalidInput("conformity battery needs seeds and draws");
  ConformityReport r;
  r.level = options.level;
  switch (options.level.kind) {
    case ConformityKind::L1: run_l1(options, r); break;
    case ConformityKind::L2: run_l2(options, r); break;
    case ConformityKind::L3: run_l3(options, r); break;
    case ConformityKind::L4: run_l4(options, r); break;
  }
  return r;
}

std::string format_report(const ConformityReport& r) {
  std::ostringstream out;
  for (const auto& c : r.checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (limit " << c.limit << ")";
    if (!c.detail.empty()) out << " [" << c.detail << "]";
    out << "\n";
  }
  return out.str();
}

}  // namespace nups
