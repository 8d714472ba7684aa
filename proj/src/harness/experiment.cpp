#include "nups/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "nups/core/random.hpp"
#include "nups/core/techniques.hpp"

namespace nups {
namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

SamplingStats minus(const SamplingStats& a, const SamplingStats& b) {
  SamplingStats d;
  d.prepared = a.prepared - b.prepared;
  d.delivered = a.delivered - b.delivered;
  d.remote_reads = a.remote_reads - b.remote_reads;
  d.postponed = a.postponed - b.postponed;
  d.pools_created = a.pools_created - b.pools_created;
  d.pools_on_demand = a.pools_on_demand - b.pools_on_demand;
  d.local_fallbacks = a.local_fallbacks - b.local_fallbacks;
  return d;
}

std::vector<Technique> choose_techniques(const TechniqueChoice& t, const std::vector<std::uint64_t>& counts,
                                         const ClusterConfig& cfg) {
  switch (t.mode) {
    case TechniqueChoice::Mode::Relocate:
      return assign_all(counts.size(), Technique::Relocated);
    case TechniqueChoice::Mode::Heuristic:
      return assign_techniques(counts, cfg.replication_threshold_factor);
    case TechniqueChoice::Mode::TopK:
      return assign_top_k(counts, t.top_k);
  }
  return {};
}

/// Everything a run needs besides the cluster: data, shards and the epoch body.
struct Workload {
  std::string metric_name;
  std::uint64_t num_keys = 0;
  std::uint32_t value_dim = 0;
  std::vector<std::uint64_t> access_counts;
  Initializer init;
  std::function<void(Cluster&)> setup;
  std::function<Task<void>(WorkerContext&)> place;
  std::function<Task<void>(WorkerContext&)> epoch;
  std::function<double(const std::function<Value(Key)>&)> evaluate;
};

Task<void> hint_keys(WorkerContext& w, std::vector<Key> keys) {
  w.localize_hint(keys);
  co_return;
}

std::size_t global_index(const WorkerContext& w, std::uint32_t workers_per_node) {
  return std::size_t{w.node_id()} * workers_per_node + w.worker_index();
}

Workload matrix_workload(const ExperimentSpec& spec) {
  auto data = std::make_shared<MatrixDataset>(generate_matrix_dataset(spec.matrix));
  auto model = std::make_shared<MfModel>(MfModel{data->config.rows, data->config.cols, spec.mf.rank});
  auto shards = std::make_shared<std::vector<MfShard>>(
      partition_mf(*data, spec.cluster.num_nodes, spec.cluster.workers_per_node));
  const std::uint32_t wpn = spec.cluster.workers_per_node;
  const MfOptions opts = spec.mf;
  Workload w;
  w.metric_name = "rmse";
  w.num_keys = model->num_keys();
  w.value_dim = spec.mf.rank;
  w.access_counts = mf_access_counts(*data);
  w.init = mf_initializer(spec.mf.rank, spec.mf.init_scale, mix_seed(spec.cluster.rng_seed, 77));
  w.setup = [](Cluster&) {};
  w.place = [model, shards, wpn](WorkerContext& ctx) {
    std::vector<Key> rows;
    for (std::uint32_t r : (*shards)[global_index(ctx, wpn)].rows) rows.push_back(model->row_key(r));
    return hint_keys(ctx, std::move(rows));
  };
  w.epoch = [model, shards, wpn, opts](WorkerContext& ctx) {
    return mf_worker_epoch(ctx, *model, (*shards)[global_index(ctx, wpn)], opts);
  };
  w.evaluate = [data, model](const std::function<Value(Key)>& lookup) { return mf_rmse(data->test, *model, lookup); };
  return w;
}

Workload embedding_workload(const ExperimentSpec& spec) {
  auto data = std::make_shared<EmbeddingDataset>(generate_embedding_dataset(spec.embedding));
  auto shards = std::make_shared<std::vector<EmbeddingShard>>(
      partition_embedding(*data, spec.cluster.num_nodes, spec.cluster.workers_per_node));
  auto pi = std::make_shared<TargetDistribution>(negative_distribution(*data, spec.embed.negative_kind, spec.conformity));
  auto dist_id = std::make_shared<DistributionId>(0);
  const std::uint32_t wpn = spec.cluster.workers_per_node;
  const EmbeddingOptions opts = spec.embed;
  Workload w;
  w.metric_name = "loss";
  w.num_keys = data->config.entities;
  w.value_dim = spec.embed.dim;
  w.access_counts = embedding_access_counts(*data, *pi, spec.embed.negatives);
  w.init = embedding_initializer(spec.embed.dim, spec.embed.init_scale, mix_seed(spec.cluster.rng_seed, 78));
  w.setup = [pi, dist_id](Cluster& c) { *dist_id = c.register_distribution(*pi); };
  w.place = [shards, wpn](WorkerContext& ctx) {
    const auto& heads = (*shards)[global_index(ctx, wpn)].heads;
    return hint_keys(ctx, std::vector<Key>(heads.begin(), heads.end()));
  };
  w.epoch = [shards, wpn, dist_id, opts](WorkerContext& ctx) {
    return embedding_worker_epoch(ctx, (*shards)[global_index(ctx, wpn)], *dist_id, opts);
  };
  w.evaluate = [data](const std::function<Value(Key)>& lookup) { return embedding_test_loss(*data, lookup); };
  return w;
}

nlohmann::json spec_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["workload"] = std::string(to_string(s.workload));
  j["transport"] = s.transport == TransportKind::Simulated ? "simulated" : "tcp";
  j["technique"] = to_string(s.technique);
  j["conformity"] = to_string(s.conformity);
  j["epochs"] = s.epochs;
  j["eval_viewer"] = s.eval_viewer;
  const auto& c = s.cluster;
  j["cluster"] = {{"nodes", c.num_nodes},
                  {"workers_per_node", c.workers_per_node},
                  {"staleness", format_duration_ms(c.staleness_interval)},
                  {"replication_threshold_factor", c.replication_threshold_factor},
                  {"pool_size", c.pool_size},
                  {"use_frequency", c.use_frequency},
                  {"clip_enabled", c.clip_enabled},
                  {"clip_factor", c.clip_factor},
                  {"owner_hints", c.owner_hints},
                  {"seed", c.rng_seed}};
  j["network"] = {{"latency_us", s.network.latency.count()},
                  {"jitter_us", s.network.jitter.count()},
                  {"bandwidth_bytes_per_us", s.network.bandwidth},
                  {"seed", s.network.seed}};
  if (s.workload == WorkloadKind::MatrixFactorization) {
    const auto& m = s.matrix;
    j["data"] = {{"rows", m.rows}, {"cols", m.cols},   {"cells", m.cells},     {"rank", m.rank},
                 {"zipf", m.zipf}, {"noise", m.noise}, {"holdout", m.holdout}, {"seed", m.seed}};
    j["training"] = {{"rank", s.mf.rank},
                     {"learning_rate", s.mf.learning_rate},
                     {"regularization", s.mf.regularization},
                     {"init_scale", s.mf.init_scale},
                     {"compute_per_cell_us", s.mf.compute_per_cell.count()}};
  } else {
    const auto& e = s.embedding;
    j["data"] = {{"entities", e.entities}, {"pairs", e.pairs},     {"zipf", e.zipf},
                 {"groups", e.groups},     {"holdout", e.holdout}, {"test_negatives", e.test_negatives},
                 {"seed", e.seed}};
    j["training"] = {{"dim", s.embed.dim},
                     {"negatives", s.embed.negatives},
                     {"learning_rate", s.embed.learning_rate},
                     {"init_scale", s.embed.init_scale},
                     {"negative_distribution",
                      s.embed.negative_kind == NegativeDistribution::Uniform ? "uniform" : "frequency"},
                     {"compute_per_pair_us", s.embed.compute_per_pair.count()}};
  }
  return j;
}

void check_invariants(Cluster& c, Report& r) {
  for (const auto& e : r.epochs) {
    const auto& m = e.messages;
    if (std::accumulate(m.by_kind.begin(), m.by_kind.end(), std::uint64_t{0}) != m.total ||
        std::accumulate(m.by_cause.begin(), m.by_cause.end(), std::uint64_t{0}) != m.total) {
      r.invariant_failures.push_back("epoch " + std::to_string(e.epoch) + ": message counters disagree");
    }
    if (!std::isfinite(e.metric)) r.invariant_failures.push_back("epoch " + std::to_string(e.epoch) + ": metric not finite");
  }
  std::uint64_t bad_owner = 0, disagree = 0;
  const bool replicated = r.replicated_keys > 0;
  if (replicated) c.flush_sync();
  for (Key k = 0; k < r.num_keys; ++k) {
    if (c.techniques()[k] == Technique::Relocated) {
      std::uint32_t owners = 0;
      for (NodeId q = 0; q < c.num_nodes(); ++q) owners += c.node(q).owns(k);
      bad_owner += owners != 1;
      continue;
    }
    const Value ref = c.model_value(k, 0);
    for (NodeId q = 1; q < c.num_nodes(); ++q) {
      const Value v = c.model_value(k, q);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double scale = std::max(1.0, std::abs(static_cast<double>(ref[i])));
        if (std::abs(static_cast<double>(v[i]) - ref[i]) > 1e-12 * scale) {
          ++disagree;
          break;
        }
      }
    }
  }
  if (bad_owner) r.invariant_failures.push_back(std::to_string(bad_owner) + " relocated keys without a single owner");
  if (disagree) r.invariant_failures.push_back(std::to_string(disagree) + " replicas disagree after a sync round");
}

nlohmann::json messages_json(const MessageStats& m) {
  nlohmann::json j;
  j["total"] = m.total;
  j["payload_bytes"] = m.payload_bytes;
  nlohmann::json kinds, causes;
  for (std::size_t i = 0; i < kNumMessageKinds; ++i) {
    kinds[std::string(to_string(static_cast<MessageKind>(i)))] = m.by_kind[i];
  }
  for (std::size_t i = 0; i < kNumCauses; ++i) causes[std::string(to_string(static_cast<Cause>(i)))] = m.by_cause[i];
  j["by_kind"] = kinds;
  j["by_cause"] = causes;
  return j;
}

}  // namespace

WorkloadKind parse_workload(std::string_view text) {
  const std::string t = lower(text);
  if (t == "mf") return WorkloadKind::MatrixFactorization;
  if (t == "embed" || t == "embedding") return WorkloadKind::Embedding;
  throw InvalidInput("unknown workload '" + std::string(text) + "' (expected mf or embed)");
}

std::string_view to_string(WorkloadKind w) { return w == WorkloadKind::MatrixFactorization ? "mf" : "embed"; }

TechniqueChoice parse_technique_choice(std::string_view text) {
  const std::string t = lower(text);
  TechniqueChoice c;
  if (t == "relocate") {
    c.mode = TechniqueChoice::Mode::Relocate;
  } else if (t == "heuristic") {
    c.mode = TechniqueChoice::Mode::Heuristic;
  } else if (t.rfind("topk=", 0) == 0) {
    c.mode = TechniqueChoice::Mode::TopK;
    try {
      std::size_t used = 0;
      c.top_k = std::stoull(t.substr(5), &used);
      if (used != t.size() - 5) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("bad top-k count in '" + std::string(text) + "'");
    }
  } else {
    throw InvalidInput("unknown technique '" + std::string(text) + "' (expected relocate, heuristic or topk=K)");
  }
  return c;
}

std::string to_string(const TechniqueChoice& t) {
  switch (t.mode) {
    case TechniqueChoice::Mode::Relocate: return "relocate";
    case TechniqueChoice::Mode::Heuristic: return "heuristic";
    case TechniqueChoice::Mode::TopK: return "topk=" + std::to_string(t.top_k);
  }
  return "?";
}

Report run_experiment(const ExperimentSpec& spec) {
  const auto wall_start = std::chrono::steady_clock::now();
  Workload work = spec.workload == WorkloadKind::MatrixFactorization ? matrix_workload(spec) : embedding_workload(spec);

  ClusterOptions opts;
  opts.config = spec.cluster;
  opts.config.num_keys = work.num_keys;
  opts.config.value_dim = work.value_dim;
  opts.transport = spec.transport;
  opts.network = spec.network;
  opts.techniques = choose_techniques(spec.technique, work.access_counts, opts.config);
  opts.init = work.init;
  if (spec.eval_viewer >= opts.config.num_nodes) throw InvalidInput("eval viewer is not a node");

  Report report;
  report.spec = spec;
  report.metric_name = work.metric_name;
  report.num_keys = work.num_keys;
  report.replicated_keys = static_cast<std::uint64_t>(
      std::count(opts.techniques.begin(), opts.techniques.end(), Technique::Replicated));

  Cluster cluster(opts);
  work.setup(cluster);
  auto lookup = [&](Key k) { return cluster.model_value(k, spec.eval_viewer); };

  // Move each worker's rows (or heads) to its node before training starts.
  cluster.run_workers(work.place);
  cluster.quiesce();
  report.initial_metric = work.evaluate(lookup);
  cluster.start_sync();

  for (std::uint32_t e = 1; e <= spec.epochs; ++e) {
    const MessageStats msgs_before = cluster.message_stats();
    const SamplingStats sampling_before = cluster.sampling_stats();
    const std::uint64_t rounds_before = cluster.sync_stats().rounds_started;
    for (NodeId q = 0; q < cluster.num_nodes(); ++q) cluster.node(q).reset_access_counts();
    const Micros virtual_start = cluster.runtime().now();
    const auto wall_epoch = std::chrono::steady_clock::now();

    cluster.run_workers(work.epoch);
    const Micros duration =
        cluster.simulated()
            ? cluster.runtime().now() - virtual_start
            : std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - wall_epoch);
    cluster.quiesce();

    EpochMetrics m;
    m.epoch = e;
    m.duration = duration;
    m.messages = cluster.message_stats() - msgs_before;
    m.sampling = minus(cluster.sampling_stats(), sampling_before);
    m.sync_rounds = cluster.sync_stats().rounds_started - rounds_before;
    m.sync_hz = duration.count() > 0 ? static_cast<double>(m.sync_rounds) * 1e6 / static_cast<double>(duration.count())
                                     : 0.0;
    std::vector<std::uint64_t> direct(work.num_keys, 0), sampled(work.num_keys, 0);
    for (NodeId q = 0; q < cluster.num_nodes(); ++q) {
      const auto counts = cluster.node(q).access_counts();
      for (std::size_t k = 0; k < work.num_keys; ++k) {
        direct[k] += counts.direct[k];
        sampled[k] += counts.sampling[k];
      }
    }
    m.direct_accesses = std::accumulate(direct.begin(), direct.end(), std::uint64_t{0});
    m.sampling_accesses = std::accumulate(sampled.begin(), sampled.end(), std::uint64_t{0});
    m.metric = work.evaluate(lookup);
    report.epochs.push_back(m);
    report.direct_histogram = std::move(direct);
    report.sampling_histogram = std::move(sampled);
  }
  cluster.stop_sync();
  cluster.quiesce();
  check_invariants(cluster, report);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return report;
}

std::string report_json(const Report& r) {
  nlohmann::json j;
  j["spec"] = spec_json(r.spec);
  j["metric"] = r.metric_name;
  j["initial_metric"] = r.initial_metric;
  j["num_keys"] = r.num_keys;
  j["replicated_keys"] = r.replicated_keys;
  nlohmann::json epochs = nlohmann::json::array();
  MessageStats total;
  for (const auto& e : r.epochs) {
    total += e.messages;
    epochs.push_back({{"epoch", e.epoch},
                      {r.metric_name, e.metric},
                      {"duration_us", e.duration.count()},
                      {"messages", messages_json(e.messages)},
                      {"sync_rounds", e.sync_rounds},
                      {"sync_hz", e.sync_hz},
                      {"direct_accesses", e.direct_accesses},
                      {"sampling_accesses", e.sampling_accesses},
                      {"sampling",
                       {{"prepared", e.sampling.prepared},
                        {"delivered", e.sampling.delivered},
                        {"remote_reads", e.sampling.remote_reads},
                        {"postponed", e.sampling.postponed},
                        {"pools_created", e.sampling.pools_created},
                        {"pools_on_demand", e.sampling.pools_on_demand},
                        {"local_fallbacks", e.sampling.local_fallbacks}}}});
  }
  j["epochs"] = epochs;
  j["messages_total"] = messages_json(total);
  j["invariant_failures"] = r.invariant_failures;
  if (!r.epochs.empty()) j["final_metric"] = r.epochs.back().metric;
  return j.dump(2) + "\n";
}

std::string epochs_csv(const Report& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch," << r.metric_name << ",duration_us,messages_total";
  for (std::size_t i = 0; i < kNumMessageKinds; ++i) out << ",msg_" << to_string(static_cast<MessageKind>(i));
  for (std::size_t i = 0; i < kNumCauses; ++i) out << ",cause_" << to_string(static_cast<Cause>(i));
  out << ",sync_rounds,sync_hz,direct_accesses,sampling_accesses,samples_postponed,samples_remote\n";
  for (const auto& e : r.epochs) {
    out << e.epoch << ',' << e.metric << ',' << e.duration.count() << ',' << e.messages.total;
    for (auto v : e.messages.by_kind) out << ',' << v;
    for (auto v : e.messages.by_cause) out << ',' << v;
    out << ',' << e.sync_rounds << ',' << e.sync_hz << ',' << e.direct_accesses << ',' << e.sampling_accesses << ','
        << e.sampling.postponed << ',' << e.sampling.remote_reads << '\n';
  }
  return out.str();
}

std::string histogram_csv(const Report& r) {
  std::vector<Key> order(r.direct_histogram.size());
  std::iota(order.begin(), order.end(), Key{0});
  auto total = [&](Key k) { return r.direct_histogram[k] + r.sampling_histogram[k]; };
  std::stable_sort(order.begin(), order.end(), [&](Key a, Key b) { return total(a) > total(b); });
  std::ostringstream out;
  out << "rank,key,direct,sampling\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    out << i + 1 << ',' << order[i] << ',' << r.direct_histogram[order[i]] << ',' << r.sampling_histogram[order[i]]
        << '\n';
  }
  return out.str();
}

void write_report(const Report& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw InvalidInput("cannot write " + name + " in " + dir);
    f << body;
  };
  write("report.json", report_json(r));
  write("epochs.csv", epochs_csv(r));
  write("histogram.csv", histogram_csv(r));
}

}  // namespace nups
