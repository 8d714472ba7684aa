#include <algorithm>
#include <random>

#include "doctest.h"
#include "nups/core/config.hpp"
#include "nups/core/techniques.hpp"

using namespace nups;

TEST_CASE("heuristic keeps uniform counts relocated") {
  const std::vector<std::uint64_t> counts{5, 5, 5, 5};
  auto t = assign_techniques(counts, 100);
  CHECK(std::all_of(t.begin(), t.end(), [](Technique x) { return x == Technique::Relocated; }));
}

TEST_CASE("heuristic replicates a single dominant key") {
  std::vector<std::uint64_t> counts(1000, 1);
  counts[0] = 1'000'000;
  // mean = (10^6 + 999) / 1000 = 1000.999, threshold = 100099.9
  const double mean = (1e6 + 999) / 1000.0;
  CHECK(mean * 100 == doctest::Approx(100099.9));
  auto t = assign_techniques(counts, 100);
  CHECK(t[0] == Technique::Replicated);
  CHECK(std::count(t.begin(), t.end(), Technique::Replicated) == 1);
}

TEST_CASE("heuristic on a single key") {
  const std::vector<std::uint64_t> counts{1};
  CHECK(assign_techniques(counts, 100) == std::vector<Technique>{Technique::Relocated});
}

TEST_CASE("heuristic boundary is strict") {
  // mean = 1, factor 2: a count of exactly 2 * mean stays relocated.
  std::vector<std::uint64_t> counts{4, 0, 0, 0};  // mean 1
  CHECK(assign_techniques(counts, 4)[0] == Technique::Relocated);
  CHECK(assign_techniques(counts, 3.99)[0] == Technique::Replicated);
}

TEST_CASE("heuristic rejects empty and all-zero counts") {
  CHECK_THROWS_AS(assign_techniques(std::vector<std::uint64_t>{}, 100), InvalidInput);
  CHECK_THROWS_AS(assign_techniques(std::vector<std::uint64_t>{0, 0}, 100), InvalidInput);
  CHECK_THROWS_AS(assign_techniques(std::vector<std::uint64_t>{1}, 0), InvalidInput);
}

TEST_CASE("heuristic is monotone and pure") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint64_t> counts(50);
    for (auto& c : counts) c = rng() % 1000;
    counts[rng() % 50] += 200000;
    const auto before = assign_techniques(counts, 20);
    CHECK(before == assign_techniques(counts, 20));
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (before[k] != Technique::Replicated) continue;
      auto bumped = counts;
      bumped[k] += 1 + rng() % 100000;
      CHECK(assign_techniques(bumped, 20)[k] == Technique::Replicated);
    }
  }
}

TEST_CASE("top-k picks the most accessed keys") {
  const std::vector<std::uint64_t> counts{3, 9, 1, 9, 7};
  auto t = assign_top_k(counts, 2);
  CHECK(t == std::vector<Technique>{Technique::Relocated, Technique::Replicated, Technique::Relocated,
                                    Technique::Replicated, Technique::Relocated});
  const auto none = assign_top_k(counts, 0);
  CHECK(std::count(none.begin(), none.end(), Technique::Replicated) == 0);
}

TEST_CASE("home nodes") {
  CHECK(home_node_of(0, 100, 4) == 0);
  CHECK(home_node_of(99, 100, 4) == 3);
  CHECK(home_node_of(50, 100, 1) == 0);
  CHECK(home_node_of(24, 100, 4) == 0);
  CHECK(home_node_of(25, 100, 4) == 1);
}

TEST_CASE("home ranges partition the key space") {
  for (std::uint64_t n : {1ull, 7ull, 100ull, 101ull, 1000ull}) {
    for (std::uint32_t q : {1u, 2u, 3u, 4u, 7u, 8u}) {
      std::uint64_t covered = 0;
      Key expected_begin = 0;
      for (NodeId node = 0; node < q; ++node) {
        auto [b, e] = home_range(node, n, q);
        CHECK(b == expected_begin);
        for (Key k = b; k < e; ++k) CHECK(home_node_of(k, n, q) == node);
        covered += e - b;
        expected_begin = e;
      }
      CHECK(covered == n);
    }
  }
}

TEST_CASE("durations parse") {
  CHECK(parse_duration_ms("40") == Micros{40'000});
  CHECK(parse_duration_ms("40ms") == Micros{40'000});
  CHECK(parse_duration_ms("1s") == Micros{1'000'000});
  CHECK(parse_duration_ms("500us") == Micros{500});
  CHECK(parse_duration_ms("0.5") == Micros{500});
  CHECK(parse_duration_ms("inf") == kNever);
  CHECK(parse_duration_ms("never") == kNever);
  CHECK_THROWS_AS(parse_duration_ms("abc"), InvalidInput);
  CHECK_THROWS_AS(parse_duration_ms("0"), InvalidInput);
}

TEST_CASE("config text formats") {
  auto kv = parse_cluster_config("num_nodes=4\n# comment\nworkers_per_node = 2\nstaleness_interval=200ms\n");
  CHECK(kv.num_nodes == 4);
  CHECK(kv.workers_per_node == 2);
  CHECK(kv.staleness_interval == Micros{200'000});

  auto js = parse_cluster_config(R"({"num_nodes": 3, "pool_size": 10, "staleness_interval": "inf"})");
  CHECK(js.num_nodes == 3);
  CHECK(js.pool_size == 10);
  CHECK(js.staleness_interval == kNever);

  CHECK_THROWS_AS(parse_cluster_config("bogus=1"), InvalidInput);
  CHECK_THROWS_AS(parse_cluster_config("num_nodes=0"), InvalidInput);
}

TEST_CASE("defaults") {
  ClusterConfig cfg;
  CHECK(cfg.staleness_interval == Micros{40'000});
  CHECK(cfg.replication_threshold_factor == 100.0);
  CHECK(cfg.pool_size == 250);
  CHECK(cfg.use_frequency == 16);
  CHECK(cfg.clip_factor == 2.0);
}
