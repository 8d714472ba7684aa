// Command-line front end: train a workload on a simulated or loopback cluster,
// or run the sampling conformity battery.

#include <cstdio>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "nups/core/config.hpp"
#include "nups/harness/conformity.hpp"
#include "nups/harness/experiment.hpp"

using namespace nups;

namespace {

struct RunArgs {
  std::string workload = "mf";
  std::uint32_t nodes = 4;
  std::uint32_t workers = 2;
  std::string technique = "heuristic";
  std::string conformity = "L1";
  std::uint32_t epochs = 10;
  std::uint64_t seed = 1;
  std::string staleness = "40";
  std::string out;
  std::string config;
  bool sync_disabled = false;
  double clip_factor = 0.0;
  std::uint32_t use_frequency = 16;
  std::uint32_t pool_size = 250;
  double threshold_factor = 100.0;
  std::string transport = "sim";
  std::int64_t latency_us = 100;
  std::int64_t jitter_us = 0;
  double bandwidth = 1250.0;
  std::int64_t compute_us = 0;
  std::uint32_t eval_viewer = 0;

  // Dataset and model.
  std::uint32_t rows = 1000, cols = 1000, rank = 8;
  std::uint64_t cells = 100'000;
  double zipf = 1.1;
  double learning_rate = -1.0;
  std::uint32_t entities = 1000, dim = 16, negatives = 3;
  std::uint64_t pairs = 20'000;
  std::string negative_kind = "uniform";

  /// Long names of the flags given on the command line.
  std::set<std::string> given;
  bool set(const std::string& flag) const { return config.empty() || given.count(flag) > 0; }
};

ExperimentSpec build_spec(const RunArgs& a) {
  ExperimentSpec s;
  if (!a.config.empty()) s.cluster = load_cluster_config(a.config);
  s.workload = parse_workload(a.workload);
  // Cluster flags override the config file only when given explicitly.
  if (a.set("nodes")) s.cluster.num_nodes = a.nodes;
  if (a.set("workers")) s.cluster.workers_per_node = a.workers;
  if (a.set("seed")) s.cluster.rng_seed = a.seed;
  if (a.set("staleness-ms")) s.cluster.staleness_interval = parse_duration_ms(a.staleness);
  if (a.sync_disabled) s.cluster.staleness_interval = kNever;
  if (a.set("use-frequency")) s.cluster.use_frequency = a.use_frequency;
  if (a.set("pool-size")) s.cluster.pool_size = a.pool_size;
  if (a.set("threshold-factor")) s.cluster.replication_threshold_factor = a.threshold_factor;
  if (a.clip_factor > 0.0) {
    s.cluster.clip_enabled = true;
    s.cluster.clip_factor = a.clip_factor;
  }
  if (a.transport == "sim") {
    s.transport = TransportKind::Simulated;
  } else if (a.transport == "tcp") {
    s.transport = TransportKind::Tcp;
  } else {
    throw InvalidInput("unknown transport '" + a.transport + "' (expected sim or tcp)");
  }
  s.network.latency = Micros{a.latency_us};
  s.network.jitter = Micros{a.jitter_us};
  s.network.bandwidth = a.bandwidth;
  s.network.seed = s.cluster.rng_seed;
  s.technique = parse_technique_choice(a.technique);
  s.conformity = parse_conformity(a.conformity);
  s.epochs = a.epochs;
  s.eval_viewer = a.eval_viewer;

  s.matrix.rows = a.rows;
  s.matrix.cols = a.cols;
  s.matrix.cells = a.cells;
  s.matrix.rank = a.rank;
  s.matrix.zipf = a.zipf;
  s.matrix.seed = s.cluster.rng_seed;
  s.mf.rank = a.rank;
  s.mf.compute_per_cell = Micros{a.compute_us};
  if (a.learning_rate > 0.0) s.mf.learning_rate = a.learning_rate;

  s.embedding.entities = a.entities;
  s.embedding.pairs = a.pairs;
  s.embedding.zipf = a.zipf;
  s.embedding.seed = s.cluster.rng_seed;
  s.embed.dim = a.dim;
  s.embed.negatives = a.negatives;
  s.embed.negative_kind = parse_negative_distribution(a.negative_kind);
  s.embed.compute_per_pair = Micros{a.compute_us};
  if (a.learning_rate > 0.0) s.embed.learning_rate = a.learning_rate;
  s.cluster.validate();
  return s;
}

int run_command(const RunArgs& a) {
  const ExperimentSpec spec = build_spec(a);
  const Report r = run_experiment(spec);
  std::printf("%s initial %.6f\n", r.metric_name.c_str(), r.initial_metric);
  for (const auto& e : r.epochs) {
    std::printf("epoch %u %s %.6f messages %llu sync %.1f Hz duration %.3f s\n", e.epoch, r.metric_name.c_str(),
                e.metric, static_cast<unsigned long long>(e.messages.total), e.sync_hz,
                static_cast<double>(e.duration.count()) / 1e6);
  }
  std::printf("replicated keys %llu of %llu, wall %.2f s\n", static_cast<unsigned long long>(r.replicated_keys),
              static_cast<unsigned long long>(r.num_keys), r.wall_seconds);
  if (!a.out.empty()) write_report(r, a.out);
  for (const auto& f : r.invariant_failures) std::fprintf(stderr, "invariant violated: %s\n", f.c_str());
  return r.invariant_failures.empty() ? 0 : 1;
}

int verify_command(const std::string& scheme, BatteryOptions o) {
  o.level = parse_conformity(scheme);
  const auto r = run_conformity_battery(o);
  std::cout << format_report(r);
  std::cout << (r.pass() ? "conformity checks passed\n" : "conformity checks failed\n");
  return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter server with per-key management techniques"};
  app.require_subcommand(1);

  RunArgs a;
  auto* run = app.add_subcommand("run", "Train a workload and write a report");
  run->add_option("--workload", a.workload, "mf or embed")->capture_default_str();
  run->add_option("--nodes", a.nodes, "Number of nodes Q")->capture_default_str();
  run->add_option("--workers", a.workers, "Worker threads per node")->capture_default_str();
  run->add_option("--technique", a.technique, "relocate, heuristic or topk=K")->capture_default_str();
  run->add_option("--conformity", a.conformity, "Negative sampling level L1, L2[:bound], L3 or L4")
      ->capture_default_str();
  run->add_option("--epochs", a.epochs)->capture_default_str();
  run->add_option("--seed", a.seed)->capture_default_str();
  run->add_option("--staleness-ms", a.staleness, "Replica staleness bound (ms, or inf)")->capture_default_str();
  run->add_flag("--sync-disabled", a.sync_disabled, "Never synchronize replicas");
  run->add_option("--clip-factor", a.clip_factor, "Clip replicated updates above this multiple of the mean norm");
  run->add_option("--use-frequency", a.use_frequency, "Sample reuse U")->capture_default_str();
  run->add_option("--pool-size", a.pool_size, "Sample pool size G")->capture_default_str();
  run->add_option("--threshold-factor", a.threshold_factor, "Heuristic replication threshold")->capture_default_str();
  run->add_option("--config", a.config, "Cluster config file (JSON or key=value), applied before flags");
  run->add_option("--transport", a.transport, "sim or tcp")->capture_default_str();
  run->add_option("--latency-us", a.latency_us)->capture_default_str();
  run->add_option("--jitter-us", a.jitter_us)->capture_default_str();
  run->add_option("--bandwidth", a.bandwidth, "Bytes per microsecond, 0 for none")->capture_default_str();
  run->add_option("--compute-us", a.compute_us, "Simulated compute per training example")->capture_default_str();
  run->add_option("--eval-node", a.eval_viewer, "Node whose model view is evaluated")->capture_default_str();
  run->add_option("--rows", a.rows)->capture_default_str();
  run->add_option("--cols", a.cols)->capture_default_str();
  run->add_option("--cells", a.cells)->capture_default_str();
  run->add_option("--rank", a.rank)->capture_default_str();
  run->add_option("--zipf", a.zipf)->capture_default_str();
  run->add_option("--learning-rate", a.learning_rate);
  run->add_option("--entities", a.entities)->capture_default_str();
  run->add_option("--pairs", a.pairs)->capture_default_str();
  run->add_option("--dim", a.dim)->capture_default_str();
  run->add_option("--negatives", a.negatives)->capture_default_str();
  run->add_option("--negative-distribution", a.negative_kind, "uniform or frequency")->capture_default_str();
  run->add_option("--out", a.out, "Directory for report.json, epochs.csv and histogram.csv");

  std::string scheme = "L1";
  BatteryOptions b;
  auto* verify = app.add_subcommand("verify-conformity", "Statistical checks of a sampling scheme");
  verify->add_option("--scheme", scheme, "L1, L2[:bound], L3 or L4")->capture_default_str();
  verify->add_option("--draws", b.draws)->capture_default_str();
  verify->add_option("--seeds", b.seeds)->capture_default_str();
  verify->add_option("--keys", b.keys)->capture_default_str();
  verify->add_option("--pool-size", b.pool_size)->capture_default_str();
  verify->add_option("--use-frequency", b.use_frequency)->capture_default_str();
  verify->add_option("--seed", b.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  for (const auto* opt : run->get_options()) {
    if (opt->count() > 0 && !opt->get_lnames().empty()) a.given.insert(opt->get_lnames().front());
  }
  try {
    if (*run) return run_command(a);
    return verify_command(scheme, b);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
