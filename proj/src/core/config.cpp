#include "nups/core/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace nups {

std::string_view to_string(Technique t) {
  return t == Technique::Replicated ? "replicated" : "relocated";
}

std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::Direct: return "direct";
    case Cause::Relocation: return "relocation";
    case Cause::Sampling: return "sampling";
    case Cause::Sync: return "sync";
  }
  return "?";
}

void ClusterConfig::validate() const {
  if (num_nodes < 1 || workers_per_node < 1 || value_dim < 1 || num_keys < 1) {
    throw InvalidInput("cluster config: counts must be >= 1");
  }
  if (staleness_interval <= Micros::zero()) {
    throw InvalidInput("cluster config: staleness interval must be > 0");
  }
  if (!(replication_threshold_factor > 0.0)) {
    throw InvalidInput("cluster config: replication threshold factor must be > 0");
  }
  if (pool_size < 1 || use_frequency < 1) {
    throw InvalidInput("cluster config: pool size and use frequency must be >= 1");
  }
  if (!(clip_factor > 0.0) || !(clip_smoothing > 0.0) || clip_smoothing > 1.0) {
    throw InvalidInput("cluster config: bad clipping parameters");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view name, std::string_view text) {
  text = trim(text);
  T out{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInput("config: bad value for " + std::string(name) + ": '" + std::string(text) + "'");
  }
  return out;
}

bool parse_bool(std::string_view name, std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw InvalidInput("config: bad boolean for " + std::string(name));
}

}  // namespace

Micros parse_duration_ms(std::string_view text) {
  text = trim(text);
  if (text == "inf" || text == "never" || text == "off" || text == "disabled") return kNever;
  double scale_us = 1000.0;
  if (text.ends_with("us")) {
    scale_us = 1.0;
    text.remove_suffix(2);
  } else if (text.ends_with("ms")) {
    text.remove_suffix(2);
  } else if (text.ends_with("s")) {
    scale_us = 1e6;
    text.remove_suffix(1);
  }
  const double v = parse_number<double>("duration", text);
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("duration must be positive");
  return Micros(static_cast<std::int64_t>(std::llround(v * scale_us)));
}

std::string format_duration_ms(Micros d) {
  if (d == kNever) return "inf";
  std::ostringstream os;
  os << static_cast<double>(d.count()) / 1000.0;
  return os.str();
}

void apply_setting(ClusterConfig& cfg, std::string_view name, std::string_view value) {
  name = trim(name);
  if (name == "num_nodes" || name == "nodes") {
    cfg.num_nodes = parse_number<std::uint32_t>(name, value);
  } else if (name == "workers_per_node" || name == "workers") {
    cfg.workers_per_node = parse_number<std::uint32_t>(name, value);
  } else if (name == "value_dim") {
    cfg.value_dim = parse_number<std::uint32_t>(name, value);
  } else if (name == "num_keys") {
    cfg.num_keys = parse_number<std::uint64_t>(name, value);
  } else if (name == "staleness_interval" || name == "staleness_ms") {
    cfg.staleness_interval = parse_duration_ms(value);
  } else if (name == "replication_threshold_factor") {
    cfg.replication_threshold_factor = parse_number<double>(name, value);
  } else if (name == "pool_size") {
    cfg.pool_size = parse_number<std::uint32_t>(name, value);
  } else if (name == "use_frequency") {
    cfg.use_frequency = parse_number<std::uint32_t>(name, value);
  } else if (name == "clip_enabled") {
    cfg.clip_enabled = parse_bool(name, value);
  } else if (name == "clip_factor") {
    cfg.clip_factor = parse_number<double>(name, value);
    cfg.clip_enabled = true;
  } else if (name == "clip_smoothing") {
    cfg.clip_smoothing = parse_number<double>(name, value);
  } else if (name == "owner_hints") {
    cfg.owner_hints = parse_bool(name, value);
  } else if (name == "rng_seed" || name == "seed") {
    cfg.rng_seed = parse_number<std::uint64_t>(name, value);
  } else {
    throw InvalidInput("config: unknown setting '" + std::string(name) + "'");
  }
}

ClusterConfig parse_cluster_config(std::string_view text) {
  ClusterConfig cfg;
  const auto body = trim(text);
  if (!body.empty() && body.front() == '{') {
    const auto doc = nlohmann::json::parse(body);
    for (const auto& [name, v] : doc.items()) {
      apply_setting(cfg, name, v.is_string() ? v.get<std::string>() : v.dump());
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      std::string_view l = line;
      if (auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
      l = trim(l);
      if (l.empty()) continue;
      const auto eq = l.find('=');
      if (eq == std::string_view::npos) throw InvalidInput("config: expected key=value, got '" + line + "'");
      apply_setting(cfg, l.substr(0, eq), l.substr(eq + 1));
    }
  }
  cfg.validate();
  return cfg;
}

ClusterConfig load_cluster_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cluster_config(ss.str());
}

}  // namespace nups
