#include "nups/sampling/distribution.hpp"

#include <cctype>
#include <cmath>
#include <numeric>

namespace nups {

ConformityLevel parse_conformity(std::string_view text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  ConformityLevel level;
  if (t == "L1") {
    level.kind = ConformityKind::L1;
  } else if (t == "L2") {
    level.kind = ConformityKind::L2;
  } else if (t.rfind("L2:", 0) == 0) {
    level.kind = ConformityKind::L2;
    try {
      std::size_t used = 0;
      level.bound = std::stoull(t.substr(3), &used);
      if (used != t.size() - 3 || level.bound == 0) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("bad L2 bound in '" + std::string(text) + "'");
    }
  } else if (t == "L3") {
    level.kind = ConformityKind::L3;
  } else if (t == "L4") {
    level.kind = ConformityKind::L4;
  } else {
    throw InvalidInput("unknown conformity level '" + std::string(text) + "'");
  }
  return level;
}

std::string to_string(const ConformityLevel& level) {
  switch (level.kind) {
    case ConformityKind::L1: return "L1";
    case ConformityKind::L2: return level.bound ? "L2:" + std::to_string(level.bound) : "L2";
    case ConformityKind::L3: return "L3";
    case ConformityKind::L4: return "L4";
  }
  return "?";
}

std::string_view to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::Independent: return "independent";
    case SchemeKind::PooledReuse: return "pooled-reuse";
    case SchemeKind::PooledReusePostponing: return "pooled-reuse-postponing";
    case SchemeKind::Local: return "local";
  }
  return "?";
}

SchemeChoice choose_scheme(const ConformityLevel& level, std::uint32_t pool_size, std::uint32_t use_frequency) {
  switch (level.kind) {
    case ConformityKind::L1:
      return {SchemeKind::Independent, pool_size};
    case ConformityKind::L2: {
      const std::uint64_t natural = std::uint64_t{pool_size} * use_frequency;
      if (level.bound == 0 || level.bound >= natural) return {SchemeKind::PooledReuse, pool_size};
      const std::uint64_t g = level.bound / use_frequency;
      if (g == 0) return {SchemeKind::Independent, pool_size};
      return {SchemeKind::PooledReuse, static_cast<std::uint32_t>(g)};
    }
    case ConformityKind::L3:
      return {SchemeKind::PooledReusePostponing, pool_size};
    case ConformityKind::L4:
      return {SchemeKind::Local, pool_size};
  }
  return {SchemeKind::Independent, pool_size};
}

TargetDistribution::TargetDistribution(std::vector<Key> support, std::vector<double> probabilities,
                                       ConformityLevel level)
    : support_(std::move(support)), probs_(std::move(probabilities)), level_(level) {
  if (support_.empty()) throw InvalidInput("distribution has empty support");
  if (support_.size() != probs_.size()) throw InvalidInput("support and probabilities differ in length");
  double total = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw InvalidInput("probabilities must be finite and non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("probabilities must sum to 1 (got " + std::to_string(total) + ")");
  index_.reserve(support_.size());
  for (std::size_t i = 0; i < support_.size(); ++i) {
    if (!index_.emplace(support_[i], i).second) throw InvalidInput("duplicate key in distribution support");
  }
  alias_ = AliasTable(probs_);
}

TargetDistribution TargetDistribution::over_keys(std::span<const double> pi, ConformityLevel level) {
  std::vector<Key> support;
  std::vector<double> probs;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    if (pi[k] < 0.0 || !std::isfinite(pi[k])) throw InvalidInput("probabilities must be finite and non-negative");
    if (pi[k] > 0.0) {
      support.push_back(k);
      probs.push_back(pi[k]);
    }
  }
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("probabilities must sum to 1 (got " + std::to_string(total) + ")");
  return TargetDistribution(std::move(support), std::move(probs), level);
}

double TargetDistribution::probability(Key k) const {
  auto it = index_.find(k);
  return it == index_.end() ? 0.0 : probs_[it->second];
}

}  // namespace nups
