#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge::cloze {

inline constexpr std::string_view kMaskPlaceholder = "[MASK]";

struct ClozeItem {
  std::string id;
  std::string text;
  std::string answer;
  std::optional<std::string> subdomain;
};

struct Candidate {
  std::string term;
  double probability = 0.0;
};

struct PredictionRecord {
  std::string id;
  std::vector<Candidate> candidates;
};

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

inline ClozeItem parse_item(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("cloze item is not an object");
  ClozeItem it;
  try {
    it.id = j.at("id").get<std::string>();
    it.text = j.at("text").get<std::string>();
    it.answer = j.at("answer").get<std::string>();
    if (auto s = j.find("subdomain"); s != j.end() && !s->is_null()) it.subdomain = s->get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad cloze item: ") + e.what());
  }
  if (count_occurrences(it.text, kMaskPlaceholder) != 1) {
    throw InputError("cloze item '" + it.id + "' must contain exactly one [MASK]");
  }
  if (text::trim(it.answer).empty()) throw InputError("cloze item '" + it.id + "' has an empty answer");
  return it;
}

inline PredictionRecord parse_prediction(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("prediction record is not an object");
  PredictionRecord p;
  try {
    p.id = j.at("id").get<std::string>();
    for (const auto& c : j.at("candidates")) {
      if (!c.is_array() || c.size() != 2) throw InputError("candidate must be [term, probability]");
      p.candidates.push_back({c[0].get<std::string>(), c[1].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad prediction record: ") + e.what());
  }
  if (p.candidates.empty()) throw InputError("prediction '" + p.id + "' has no candidates");
  for (std::size_t i = 0; i < p.candidates.size(); ++i) {
    const double pr = p.candidates[i].probability;
    if (!(pr >= 0.0 && pr <= 1.0)) throw InputError("prediction '" + p.id + "' has a probability outside [0, 1]");
    if (i && pr > p.candidates[i - 1].probability) {
      throw InputError("prediction '" + p.id + "' candidates are not in descending probability");
    }
  }
  return p;
}

template <typename T, typename Parse>
std::vector<T> read_jsonl(const std::filesystem::path& path, Parse&& parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ClozeItem> read_items(const std::filesystem::path& p) {
  return read_jsonl<ClozeItem>(p, [](const nlohmann::json& j) { return parse_item(j); });
}

inline std::vector<PredictionRecord> read_predictions(const std::filesystem::path& p) {
  return read_jsonl<PredictionRecord>(p, [](const nlohmann::json& j) { return parse_prediction(j); });
}

struct MatchOptions {
  bool case_fold = false;
};

inline std::string normalize_term(std::string_view s, const MatchOptions& opt) {
  std::string t = text::trim(text::nfc(s));
  return opt.case_fold ? text::to_lower_tr(t) : t;
}

/// Per-item correctness for ranks 1..k, aligned with `items`.
struct TopkResult {
  std::vector<std::uint8_t> flags;
  std::size_t correct = 0;

  double accuracy() const {
    return flags.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(flags.size());
  }
};

namespace detail {

inline std::vector<const PredictionRecord*> align(std::span<const ClozeItem> items,
                                                  std::span<const PredictionRecord> preds) {
  std::unordered_map<std::string_view, const PredictionRecord*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.id, &p).second) throw InputError("duplicate prediction id '" + p.id + "'");
  }
  std::vector<const PredictionRecord*> out;
  out.reserve(items.size());
  for (const auto& it : items) {
    auto f = by_id.find(it.id);
    if (f == by_id.end()) throw InputError("no prediction for item '" + it.id + "'");
    out.push_back(f->second);
  }
  if (by_id.size() != items.size()) throw InputError("predictions reference unknown item ids");
  return out;
}

}  // namespace detail

/// An item is correct iff the normalized gold term equals one of the first
/// k normalized candidate terms.
inline TopkResult score_topk(std::span<const ClozeItem> items, std::span<const PredictionRecord> preds,
                             std::size_t k, const MatchOptions& opt = {}) {
  if (k == 0) throw ConfigError("k must be at least 1");
  const auto aligned = detail::align(items, preds);
  TopkResult r;
  r.flags.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string gold = normalize_term(items[i].answer, opt);
    const auto& cands = aligned[i]->candidates;
    bool hit = false;
    for (std::size_t c = 0; c < std::min(k, cands.size()) && !hit; ++c) {
      hit = normalize_term(cands[c].term, opt) == gold;
    }
    r.flags.push_back(hit ? 1 : 0);
    r.correct += hit;
  }
  return r;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Linear-interpolation percentile (q in [0, 1]) of sorted values.
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("percentile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

/// Percentile bootstrap of the mean of 0/1 flags. Resample r draws from its
/// own RNG stream, so results are independent of the thread count.
inline Interval bootstrap_ci(std::span<const std::uint8_t> flags, std::size_t resamples, double level,
                             std::uint64_t seed, unsigned threads = 1) {
  if (flags.empty()) throw InputError("bootstrap needs at least one flag");
  if (resamples < 1000) throw ConfigError("bootstrap needs at least 1000 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must be in (0, 1)");
  const std::size_t n = flags.size();
  std::vector<double> means(resamples);
  parallel_for(resamples, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += flags[rng.below(n)];
    means[r] = static_cast<double>(hits) / static_cast<double>(n);
  });
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {percentile_sorted(means, tail), percentile_sorted(means, 1.0 - tail)};
}

struct ClozeConfig {
  std::size_t resamples = 10000;
  double level = 0.95;
  std::uint64_t seed = 7;
  MatchOptions match;
};

struct SubdomainScore {
  std::size_t n = 0;
  std::size_t top1 = 0;
  std::size_t top3 = 0;
};

struct ClozeReport {
  std::size_t n = 0;
  double top1 = 0.0;
  double top3 = 0.0;
  Interval ci_top1;
  Interval ci_top3;
  std::map<std::string, SubdomainScore> per_subdomain;
  std::vector<std::string> item_ids;
  std::vector<std::uint8_t> top1_flags;
  std::vector<std::uint8_t> top3_flags;
  ClozeConfig config;

  nlohmann::json to_json() const {
    nlohmann::json sub = nlohmann::json::object();
    for (const auto& [k, s] : per_subdomain) {
      sub[k] = {{"n", s.n},
                {"top1", static_cast<double>(s.top1) / static_cast<double>(s.n)},
                {"top3", static_cast<double>(s.top3) / static_cast<double>(s.n)}};
    }
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
      items.push_back({{"id", item_ids[i]}, {"top1", top1_flags[i] != 0}, {"top3", top3_flags[i] != 0}});
    }
    return {{"schema_version", kSchemaVersion},
            {"n", n},
            {"top1", top1},
            {"top3", top3},
            {"ci_top1", {ci_top1.lo, ci_top1.hi}},
            {"ci_top3", {ci_top3.lo, ci_top3.hi}},
            {"per_subdomain", sub},
            {"items", items},
            {"config",
             {{"resamples", config.resamples},
              {"level", config.level},
              {"seed", config.seed},
              {"case_fold", config.match.case_fold},
              {"ci_method", "percentile bootstrap"},
              {"match_rule", "normalized surface string"}}}};
  }
};

/// Top-1/Top-3 accuracy with bootstrap intervals. Items are scored in id
/// order so the report does not depend on file order.
inline ClozeReport evaluate_cloze(std::vector<ClozeItem> items, std::span<const PredictionRecord> preds,
                                  const ClozeConfig& cfg, unsigned threads = 1) {
  if (items.empty()) throw InputError("no cloze items");
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const TopkResult t1 = score_topk(items, preds, 1, cfg.match);
  const TopkResult t3 = score_topk(items, preds, 3, cfg.match);
  ClozeReport r;
  r.config = cfg;
  r.n = items.size();
  r.top1 = t1.accuracy();
  r.top3 = t3.accuracy();
  r.ci_top1 = bootstrap_ci(t1.flags, cfg.resamples, cfg.level, cfg.seed, threads);
  r.ci_top3 = bootstrap_ci(t3.flags, cfg.resamples, cfg.level, derive_seed(cfg.seed, 3), threads);
  r.top1_flags = t1.flags;
  r.top3_flags = t3.flags;
  for (std::size_t i = 0; i < items.size(); ++i) {
    r.item_ids.push_back(items[i].id);
    auto& s = r.per_subdomain[items[i].subdomain.value_or("(none)")];
    ++s.n;
    s.top1 += t1.flags[i];
    s.top3 += t3.flags[i];
  }
  return r;
}

}  // namespace forge::cloze
