#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/corpus.hpp"

namespace forge::balance {

enum class Action { keep, downsample, oversample };

inline const char* to_string(Action a) {
  switch (a) {
    case Action::keep: return "keep";
    case Action::downsample: return "downsample";
    case Action::oversample: return "oversample";
  }
  return "?";
}

struct GroupPlan {
  Action action = Action::keep;
  // keep_ratio in (0, 1) for downsample, multiplier >= 1 for oversample.
  double ratio = 1.0;
  double current_bytes = 0;
  double target_bytes = 0;
};

struct BalancePlan {
  std::map<std::string, GroupPlan> groups;
  std::uint64_t seed = 42;

  // Groups without an entry are kept as-is.
  const GroupPlan& for_group(const std::string& key) const {
    static const GroupPlan kKeep{};
    auto it = groups.find(key);
    return it == groups.end() ? kKeep : it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json g = nlohmann::json::object();
    for (const auto& [k, p] : groups) {
      nlohmann::json e = {{"action", to_string(p.action)},
                          {"current_bytes", p.current_bytes},
                          {"target_bytes", p.target_bytes}};
      if (p.action == Action::downsample) e["keep_ratio"] = p.ratio;
      if (p.action == Action::oversample) e["multiplier"] = p.ratio;
      g[k] = std::move(e);
    }
    return {{"seed", seed}, {"groups", g}};
  }
};

using Targets = std::map<std::string, double>;

inline Targets parse_targets(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("targets must be a JSON object of group -> bytes");
  Targets t;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw ConfigError("target for '" + k + "' is not a number");
    const double bytes = v.get<double>();
    if (!(bytes > 0) || !std::isfinite(bytes)) {
      throw ConfigError("target for '" + k + "' must be a positive byte count");
    }
    t[k] = bytes;
  }
  return t;
}

/// Ratio plan from current group sizes to byte targets.
inline BalancePlan plan_balance(const CorpusStats& stats, const Targets& targets,
                                std::uint64_t seed) {
  BalancePlan plan;
  plan.seed = seed;
  for (const auto& [key, target] : targets) {
    auto it = stats.groups.find(key);
    if (it == stats.groups.end()) throw ConfigError("target for unknown group '" + key + "'");
    if (!(target > 0) || !std::isfinite(target)) {
      throw ConfigError("target for '" + key + "' must be a positive byte count");
    }
    const double current = static_cast<double>(it->second.byte_size);
    if (current <= 0) throw ConfigError("group '" + key + "' has zero bytes but a nonzero target");
    GroupPlan p;
    p.current_bytes = current;
    p.target_bytes = target;
    if (target < current) {
      p.action = Action::downsample;
      p.ratio = target / current;
    } else if (target > current) {
      p.action = Action::oversample;
      p.ratio = target / current;
    }
    plan.groups[key] = p;
  }
  return plan;
}

// Hash streams for the two sampling decisions.
inline constexpr std::uint64_t kDownsampleStream = 1;
inline constexpr std::uint64_t kOversampleStream = 2;

/// Emits zero or more output documents for d. Decisions depend only on
/// (id, seed, ratio), so output is stable under corpus reordering.
template <typename Sink>
void apply_balance_one(const Document& d, const BalancePlan& plan, Sink&& sink) {
  const GroupPlan& p = plan.for_group(group_key(d));
  switch (p.action) {
    case Action::keep:
      sink(d);
      return;
    case Action::downsample:
      if (hash_unit(d.id, plan.seed, kDownsampleStream) < p.ratio) sink(d);
      return;
    case Action::oversample: {
      const double whole = std::floor(p.ratio);
      std::size_t copies = static_cast<std::size_t>(whole);
      if (hash_unit(d.id, plan.seed, kOversampleStream) < p.ratio - whole) ++copies;
      for (std::size_t c = 0; c < copies; ++c) {
        Document copy = d;
        copy.id += "#" + std::to_string(c);
        sink(copy);
      }
      return;
    }
  }
}

inline std::vector<Document> apply_balance(const std::vector<Document>& docs,
                                           const BalancePlan& plan) {
  std::vector<Document> out;
  out.reserve(docs.size());
  for (const auto& d : docs) apply_balance_one(d, plan, [&](const Document& x) { out.push_back(x); });
  return out;
}

}  // namespace forge::balance
