#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "forge/balance.hpp"
#include "forge/cloze.hpp"
#include "forge/common.hpp"
#include "forge/dedup.hpp"
#include "forge/masking.hpp"
#include "forge/segmentation.hpp"
#include "forge/tokenizer.hpp"

namespace forge {

/// Settings shared by all CLI stages, read from a JSON file. Every section
/// is optional. A stage seed falls back to the global "seed" when its own
/// section does not set one.
struct PipelineConfig {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  dedup::DedupConfig dedup;
  std::optional<balance::Targets> balance_targets;
  std::uint64_t balance_seed = 42;
  tok::TokenizerConfig tokenizer;
  mask::MaskingConfig masking;
  std::size_t max_len = 512;
  seg::WindowConfig window;
  cloze::ClozeConfig cloze;
  std::size_t seg_tolerance = 5;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::string_view where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) {
      throw ConfigError("unknown key '" + k + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

template <typename T>
void read_key(const nlohmann::json& obj, const char* key, std::optional<T>& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  using detail::read_key;
  using detail::reject_unknown;
  PipelineConfig c;
  try {
    reject_unknown(j, "config",
                   {"seed", "threads", "dedup", "balance", "tokenizer", "masking", "window", "cloze", "seg"});
    read_key(j, "seed", c.seed);
    read_key(j, "threads", c.threads);
    if (c.threads && *c.threads == 0) throw ConfigError("threads must be at least 1");
    if (c.seed) {
      c.dedup.seed = *c.seed;
      c.balance_seed = *c.seed;
      c.masking.seed = *c.seed;
      c.cloze.seed = *c.seed;
    }
    if (auto it = j.find("dedup"); it != j.end()) {
      reject_unknown(*it, "dedup", {"num_perm", "threshold", "shingle_n", "seed", "exact_verify"});
      read_key(*it, "num_perm", c.dedup.num_perm);
      read_key(*it, "threshold", c.dedup.threshold);
      read_key(*it, "shingle_n", c.dedup.shingle_n);
      read_key(*it, "seed", c.dedup.seed);
      read_key(*it, "exact_verify", c.dedup.exact_verify);
      c.dedup.validate();
    }
    if (auto it = j.find("balance"); it != j.end()) {
      reject_unknown(*it, "balance", {"seed", "targets"});
      read_key(*it, "seed", c.balance_seed);
      if (auto t = it->find("targets"); t != it->end()) c.balance_targets = balance::parse_targets(*t);
    }
    if (auto it = j.find("tokenizer"); it != j.end()) {
      reject_unknown(*it, "tokenizer", {"vocab_size", "min_frequency", "max_word_chars"});
      read_key(*it, "vocab_size", c.tokenizer.vocab_size);
      read_key(*it, "min_frequency", c.tokenizer.min_frequency);
      read_key(*it, "max_word_chars", c.tokenizer.max_word_chars);
      c.tokenizer.validate();
    }
    if (auto it = j.find("masking"); it != j.end()) {
      reject_unknown(*it, "masking", {"mlm_prob", "strategy_weights", "replace_probs", "span_len_p",
                                      "span_len_max", "seed", "max_len"});
      read_key(*it, "mlm_prob", c.masking.mlm_prob);
      read_key(*it, "strategy_weights", c.masking.strategy_weights);
      read_key(*it, "replace_probs", c.masking.replace_probs);
      read_key(*it, "span_len_p", c.masking.span_len_p);
      read_key(*it, "span_len_max", c.masking.span_len_max);
      read_key(*it, "seed", c.masking.seed);
      read_key(*it, "max_len", c.max_len);
      c.masking.validate();
      if (c.max_len < 3) throw ConfigError("max_len must be at least 3");
    }
    if (auto it = j.find("window"); it != j.end()) {
      reject_unknown(*it, "window", {"size", "stride"});
      read_key(*it, "size", c.window.size);
      read_key(*it, "stride", c.window.stride);
      c.window.validate();
    }
    if (auto it = j.find("cloze"); it != j.end()) {
      reject_unknown(*it, "cloze", {"resamples", "level", "seed", "case_fold"});
      read_key(*it, "resamples", c.cloze.resamples);
      read_key(*it, "level", c.cloze.level);
      read_key(*it, "seed", c.cloze.seed);
      read_key(*it, "case_fold", c.cloze.match.case_fold);
    }
    if (auto it = j.find("seg"); it != j.end()) {
      reject_unknown(*it, "seg", {"tolerance"});
      read_key(*it, "tolerance", c.seg_tolerance);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_pipeline_config(j);
}

}  // namespace forge
