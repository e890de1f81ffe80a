#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/corpus.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"
#include "forge/tokenizer.hpp"

namespace forge::mask {

using tok::TokenId;

inline constexpr TokenId kIgnoreLabel = -100;

enum class Strategy : std::uint8_t { whole_word, token_span, word_span, keyword };
inline constexpr std::array<std::string_view, 4> kStrategyNames = {"whole_word", "token_span",
                                                                   "word_span", "keyword"};
inline std::string_view to_string(Strategy s) { return kStrategyNames[static_cast<std::size_t>(s)]; }

enum class Action : std::uint8_t { mask, random, keep };

struct MaskingConfig {
  double mlm_prob = 0.25;
  // whole_word, token_span, word_span, keyword
  std::array<double, 4> strategy_weights = {0.20, 0.20, 0.30, 0.30};
  // [MASK], random token, unchanged
  std::array<double, 3> replace_probs = {0.8, 0.1, 0.1};
  double span_len_p = 0.2;
  std::size_t span_len_max = 10;
  std::uint64_t seed = 42;

  void validate() const {
    constexpr double kSumTolerance = 1e-9;
    if (!(mlm_prob > 0.0 && mlm_prob < 1.0)) throw ConfigError("mlm_prob must be in (0, 1)");
    auto check = [&](auto const& ws, const char* what) {
      double sum = 0;
      for (double w : ws) {
        if (!(w >= 0.0)) throw ConfigError(std::string(what) + " must be non-negative");
        sum += w;
      }
      if (std::abs(sum - 1.0) > kSumTolerance) throw ConfigError(std::string(what) + " must sum to 1");
    };
    check(strategy_weights, "strategy weights");
    check(replace_probs, "replacement probabilities");
    if (!(span_len_p > 0.0 && span_len_p <= 1.0)) throw ConfigError("span_len_p must be in (0, 1]");
    if (span_len_max < 1) throw ConfigError("span_len_max must be at least 1");
  }
};

/// Half-open range; word indices for keyword matches, token positions for
/// word extents.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const WordSpan&) const = default;
};

/// Multi-word term dictionary with longest-match lookup over word sequences.
/// Words are compared after NFC, Turkish lowercasing and stripping of
/// leading/trailing punctuation.
class KeywordIndex {
 public:
  static std::string normalize_word(std::string_view w) {
    return text::to_lower_tr(text::nfc(text::strip_punctuation(w)));
  }

  // Returns false for terms with no words left after normalization.
  bool add(std::string_view term) {
    const std::string norm = text::normalize_text(term);
    std::uint32_t node = 0;
    std::size_t depth = 0;
    for (auto w : text::split_whitespace(norm)) {
      std::string key = normalize_word(w);
      if (key.empty()) continue;
      auto it = nodes_[node].next.find(key);
      if (it == nodes_[node].next.end()) {
        const auto fresh = static_cast<std::uint32_t>(nodes_.size());
        nodes_[node].next.emplace(std::move(key), fresh);
        nodes_.emplace_back();
        node = fresh;
      } else {
        node = it->second;
      }
      ++depth;
    }
    if (depth == 0) return false;
    if (!nodes_[node].terminal) ++terms_;
    nodes_[node].terminal = true;
    return true;
  }

  static KeywordIndex load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open keyword list: " + path.string());
    KeywordIndex idx;
    std::string line;
    while (std::getline(in, line)) idx.add(line);
    return idx;
  }

  std::size_t size() const { return terms_; }

  /// Greedy left-to-right, longest match first, non-overlapping.
  /// `words` must already be normalized with normalize_word.
  std::vector<WordSpan> match(std::span<const std::string> words) const {
    std::vector<WordSpan> out;
    std::size_t i = 0;
    while (i < words.size()) {
      std::uint32_t node = 0;
      std::size_t best = 0;
      for (std::size_t j = i; j < words.size(); ++j) {
        auto it = nodes_[node].next.find(words[j]);
        if (it == nodes_[node].next.end()) break;
        node = it->second;
        if (nodes_[node].terminal) best = j + 1;
      }
      if (best) {
        out.push_back({i, best});
        i = best;
      } else {
        ++i;
      }
    }
    return out;
  }

  std::vector<WordSpan> match_raw(std::span<const std::string_view> words) const {
    std::vector<std::string> norm;
    norm.reserve(words.size());
    for (auto w : words) norm.push_back(normalize_word(w));
    return match(norm);
  }

 private:
  struct Node {
    std::unordered_map<std::string, std::uint32_t> next;
    bool terminal = false;
  };
  std::vector<Node> nodes_ = std::vector<Node>(1);
  std::size_t terms_ = 0;
};

inline std::vector<WordSpan> match_keywords(std::span<const std::string_view> words,
                                            const KeywordIndex& idx) {
  return idx.match_raw(words);
}

struct MaskedExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> labels;
  std::vector<std::uint8_t> word_starts;
  Strategy strategy = Strategy::whole_word;
  std::size_t maskable = 0;
  std::size_t budget = 0;
  std::size_t selected = 0;
  std::array<std::size_t, 3> actions{};  // indexed by Action

  bool operator==(const MaskedExample&) const = default;
};

inline bool is_maskable(TokenId id) {
  return id != tok::special::pad && id != tok::special::cls && id != tok::special::sep;
}

/// Token extents of words: a word starts at a flagged position or after a
/// non-maskable one, and runs over maskable positions.
inline std::vector<WordSpan> derive_words(std::span<const TokenId> tokens,
                                          std::span<const std::uint8_t> word_starts) {
  std::vector<WordSpan> words;
  bool open = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_maskable(tokens[i])) {
      open = false;
      continue;
    }
    if (!open || (i < word_starts.size() && word_starts[i])) {
      words.push_back({i, i + 1});
      open = true;
    } else {
      words.back().end = i + 1;
    }
  }
  return words;
}

namespace detail {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

class Selector {
 public:
  Selector(std::span<const TokenId> tokens, std::vector<WordSpan> words, std::size_t budget)
      : words_(std::move(words)), taken_(tokens.size(), 0), word_taken_(words_.size(), 0),
        budget_(budget) {}

  std::size_t count() const { return count_; }
  bool full() const { return count_ >= budget_; }
  const std::vector<WordSpan>& words() const { return words_; }
  const std::vector<char>& taken() const { return taken_; }
  bool word_taken(std::size_t w) const { return word_taken_[w]; }
  bool fits(std::size_t w) const { return fits_tokens(words_[w].size()); }
  bool fits_tokens(std::size_t n) const { return count_ + n <= budget_; }
  bool token_taken(std::size_t pos) const { return taken_[pos]; }

  void take_word(std::size_t w) {
    word_taken_[w] = 1;
    for (std::size_t p = words_[w].begin; p < words_[w].end; ++p) take_token(p);
  }

  void take_token(std::size_t pos) {
    if (!taken_[pos]) {
      taken_[pos] = 1;
      ++count_;
    }
  }

  // Whole words in random order while they fit, then at most one more word
  // when that lands closer to the budget than stopping short.
  void complete_with_words(Rng& rng) {
    if (full()) return;
    std::vector<std::size_t> order;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (!word_taken_[w]) order.push_back(w);
    }
    shuffle(order, rng);
    for (std::size_t w : order) {
      if (full()) return;
      if (!word_taken_[w] && fits(w)) take_word(w);
    }
    if (full()) return;
    const std::size_t deficit = budget_ - count_;
    std::size_t best = words_.size();
    for (std::size_t w : order) {
      if (word_taken_[w]) continue;
      if (best == words_.size() || words_[w].size() < words_[best].size()) best = w;
    }
    if (best != words_.size() && words_[best].size() - deficit < deficit) take_word(best);
  }

 private:
  std::vector<WordSpan> words_;
  std::vector<char> taken_;
  std::vector<char> word_taken_;
  std::size_t budget_;
  std::size_t count_ = 0;
};

inline void select_whole_word(Selector& sel, Rng& rng) { sel.complete_with_words(rng); }

inline void select_token_span(Selector& sel, std::span<const std::size_t> maskable,
                              const MaskingConfig& cfg, Rng& rng) {
  const std::size_t max_attempts = 10 * maskable.size() + 10;
  for (std::size_t attempt = 0; attempt < max_attempts && !sel.full(); ++attempt) {
    const std::size_t len = rng.geometric(cfg.span_len_p, cfg.span_len_max);
    const std::size_t start = rng.below(maskable.size());
    for (std::size_t k = start; k < std::min(maskable.size(), start + len) && !sel.full(); ++k) {
      sel.take_token(maskable[k]);
    }
  }
  if (!sel.full()) {
    std::vector<std::size_t> rest;
    for (std::size_t p : maskable) {
      if (!sel.token_taken(p)) rest.push_back(p);
    }
    shuffle(rest, rng);
    for (std::size_t p : rest) {
      if (sel.full()) break;
      sel.take_token(p);
    }
  }
}

inline void select_word_span(Selector& sel, const MaskingConfig& cfg, Rng& rng) {
  const std::size_t n = sel.words().size();
  const std::size_t max_attempts = 10 * n + 10;
  for (std::size_t attempt = 0; attempt < max_attempts && !sel.full(); ++attempt) {
    const std::size_t len = rng.geometric(cfg.span_len_p, cfg.span_len_max);
    const std::size_t start = rng.below(n);
    for (std::size_t w = start; w < std::min(n, start + len); ++w) {
      if (sel.word_taken(w)) continue;
      if (!sel.fits(w)) break;
      sel.take_word(w);
    }
  }
  sel.complete_with_words(rng);
}

// Whole keyword spans while they fit, then whole words.
inline void select_keyword(Selector& sel, std::span<const WordSpan> keyword_spans, Rng& rng) {
  std::vector<WordSpan> spans(keyword_spans.begin(), keyword_spans.end());
  shuffle(spans, rng);
  for (const auto& span : spans) {
    if (sel.full()) break;
    if (span.begin >= span.end || span.end > sel.words().size()) continue;
    std::size_t len = 0;
    bool clash = false;
    for (std::size_t w = span.begin; w < span.end; ++w) {
      clash = clash || sel.word_taken(w);
      len += sel.words()[w].size();
    }
    if (clash || !sel.fits_tokens(len)) continue;
    for (std::size_t w = span.begin; w < span.end; ++w) sel.take_word(w);
  }
  sel.complete_with_words(rng);
}

}  // namespace detail

inline Strategy sample_strategy(const MaskingConfig& cfg, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (std::size_t i = 0; i + 1 < cfg.strategy_weights.size(); ++i) {
    acc += cfg.strategy_weights[i];
    if (u < acc) return static_cast<Strategy>(i);
  }
  return Strategy::keyword;
}

/// Masks one sequence with a given paradigm. Selected positions get a label
/// and are replaced by [MASK], a random non-special token, or left as-is.
inline MaskedExample mask_with_strategy(Strategy strategy, std::span<const TokenId> tokens,
                                        std::span<const std::uint8_t> word_starts,
                                        std::span<const WordSpan> keyword_spans,
                                        const MaskingConfig& cfg, Rng& rng,
                                        std::size_t vocab_size) {
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_maskable(tokens[i])) maskable.push_back(i);
  }
  if (maskable.empty()) throw InputError("sequence has no maskable tokens");

  MaskedExample ex;
  ex.strategy = strategy;
  ex.maskable = maskable.size();
  ex.budget = static_cast<std::size_t>(std::llround(cfg.mlm_prob * static_cast<double>(maskable.size())));
  ex.word_starts.assign(word_starts.begin(), word_starts.end());
  ex.word_starts.resize(tokens.size(), 0);

  detail::Selector sel(tokens, derive_words(tokens, word_starts), ex.budget);
  switch (strategy) {
    case Strategy::whole_word: detail::select_whole_word(sel, rng); break;
    case Strategy::token_span: detail::select_token_span(sel, maskable, cfg, rng); break;
    case Strategy::word_span: detail::select_word_span(sel, cfg, rng); break;
    case Strategy::keyword: detail::select_keyword(sel, keyword_spans, rng); break;
  }

  ex.input_ids.assign(tokens.begin(), tokens.end());
  ex.labels.assign(tokens.size(), kIgnoreLabel);
  const auto& taken = sel.taken();
  const bool can_randomize = vocab_size > static_cast<std::size_t>(tok::special::count);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!taken[i]) continue;
    ex.labels[i] = tokens[i];
    const double u = rng.uniform();
    if (u < cfg.replace_probs[0]) {
      ex.input_ids[i] = tok::special::mask;
      ++ex.actions[static_cast<std::size_t>(Action::mask)];
    } else if (u < cfg.replace_probs[0] + cfg.replace_probs[1]) {
      ex.input_ids[i] = can_randomize
                            ? static_cast<TokenId>(tok::special::count +
                                                   rng.below(vocab_size - tok::special::count))
                            : tok::special::mask;
      ++ex.actions[static_cast<std::size_t>(Action::random)];
    } else {
      ++ex.actions[static_cast<std::size_t>(Action::keep)];
    }
  }
  ex.selected = sel.count();
  return ex;
}

/// Samples a paradigm by strategy weight, then masks with it.
inline MaskedExample mask_sequence(std::span<const TokenId> tokens,
                                   std::span<const std::uint8_t> word_starts,
                                   std::span<const WordSpan> keyword_spans,
                                   const MaskingConfig& cfg, Rng& rng, std::size_t vocab_size) {
  const Strategy s = sample_strategy(cfg, rng);
  return mask_with_strategy(s, tokens, word_starts, keyword_spans, cfg, rng, vocab_size);
}

inline nlohmann::json to_json(const MaskedExample& ex) {
  return {{"input_ids", ex.input_ids}, {"labels", ex.labels}, {"strategy", to_string(ex.strategy)}};
}

inline std::string to_jsonl(const MaskedExample& ex) { return to_json(ex).dump(); }

/// Sequence window ready for masking: [CLS] content [SEP].
struct PackedWindow {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> word_starts;
  std::vector<WordSpan> keyword_spans;  // indices into derive_words()
};

struct EncodedDocument {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> word_starts;
  std::vector<WordSpan> keyword_tokens;  // token ranges of matched terms
};

inline EncodedDocument encode_document(const Document& d, const tok::WordPieceEncoder& enc,
                                       const KeywordIndex& keywords) {
  EncodedDocument out;
  const std::string norm = text::normalize_text(d.text);
  const auto words = text::split_whitespace(norm);
  std::vector<std::size_t> word_tok(words.size() + 1, 0);
  for (std::size_t w = 0; w < words.size(); ++w) {
    word_tok[w] = out.ids.size();
    enc.encode_word(words[w], out.ids);
    out.word_starts.resize(out.ids.size(), 0);
    if (out.ids.size() > word_tok[w]) out.word_starts[word_tok[w]] = 1;
  }
  word_tok[words.size()] = out.ids.size();
  if (keywords.size() > 0) {
    for (const auto& span : keywords.match_raw(words)) {
      out.keyword_tokens.push_back({word_tok[span.begin], word_tok[span.end]});
    }
  }
  return out;
}

/// Splits an encoded document into windows of at most max_len tokens
/// including [CLS] and [SEP].
inline std::vector<PackedWindow> pack_windows(const EncodedDocument& doc, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("max_len must leave room for [CLS] and [SEP]");
  const std::size_t content = max_len - 2;
  std::vector<PackedWindow> out;
  for (std::size_t lo = 0; lo < doc.ids.size(); lo += content) {
    const std::size_t hi = std::min(doc.ids.size(), lo + content);
    PackedWindow w;
    w.ids.reserve(hi - lo + 2);
    w.ids.push_back(tok::special::cls);
    w.ids.insert(w.ids.end(), doc.ids.begin() + lo, doc.ids.begin() + hi);
    w.ids.push_back(tok::special::sep);
    w.word_starts.assign(w.ids.size(), 0);
    std::copy(doc.word_starts.begin() + lo, doc.word_starts.begin() + hi, w.word_starts.begin() + 1);
    w.word_starts[1] = 1;

    const auto words = derive_words(w.ids, w.word_starts);
    std::unordered_map<std::size_t, std::size_t> word_at;  // token position -> word index
    for (std::size_t k = 0; k < words.size(); ++k) word_at.emplace(words[k].begin, k);
    for (const auto& kt : doc.keyword_tokens) {
      if (kt.begin < lo || kt.end > hi || kt.begin >= kt.end) continue;
      const std::size_t b = kt.begin - lo + 1;
      const std::size_t e = kt.end - lo + 1;
      auto first = word_at.find(b);
      if (first == word_at.end()) continue;
      std::size_t last = first->second;
      while (last < words.size() && words[last].end < e) ++last;
      if (last < words.size() && words[last].end == e) w.keyword_spans.push_back({first->second, last + 1});
    }
    out.push_back(std::move(w));
  }
  return out;
}

struct DatasetStats {
  std::size_t documents = 0;
  std::size_t windows = 0;
  std::size_t skipped_windows = 0;
  std::size_t examples = 0;
  std::array<std::size_t, 4> strategy_counts{};
  std::size_t maskable_tokens = 0;
  std::size_t budget_tokens = 0;
  std::size_t labeled_tokens = 0;
  std::size_t overshoot_tokens = 0;
  std::size_t undershoot_tokens = 0;
  std::array<std::size_t, 3> actions{};

  void add(const MaskedExample& ex) {
    ++examples;
    ++strategy_counts[static_cast<std::size_t>(ex.strategy)];
    maskable_tokens += ex.maskable;
    budget_tokens += ex.budget;
    labeled_tokens += ex.selected;
    if (ex.selected > ex.budget) overshoot_tokens += ex.selected - ex.budget;
    if (ex.selected < ex.budget) undershoot_tokens += ex.budget - ex.selected;
    for (std::size_t a = 0; a < 3; ++a) actions[a] += ex.actions[a];
  }

  nlohmann::json to_json(const MaskingConfig& cfg, std::size_t max_len) const {
    nlohmann::json strategies = nlohmann::json::object();
    for (std::size_t i = 0; i < 4; ++i) strategies[std::string(kStrategyNames[i])] = strategy_counts[i];
    return {{"schema_version", kSchemaVersion},
            {"seed", cfg.seed},
            {"mlm_prob", cfg.mlm_prob},
            {"max_len", max_len},
            {"strategy_assignment", "per_example"},
            {"documents", documents},
            {"windows", windows},
            {"skipped_short_windows", skipped_windows},
            {"examples", examples},
            {"strategy_counts", strategies},
            {"maskable_tokens", maskable_tokens},
            {"budget_tokens", budget_tokens},
            {"labeled_tokens", labeled_tokens},
            {"overshoot_tokens", overshoot_tokens},
            {"undershoot_tokens", undershoot_tokens},
            {"actions", {{"mask", actions[0]}, {"random", actions[1]}, {"keep", actions[2]}}}};
  }
};

/// Streaming MLM dataset generator. Example k is masked with its own RNG
/// stream derived from (seed, k), so output is identical for any thread
/// count or batch split.
class DatasetBuilder {
 public:
  static constexpr std::size_t kMinMaskable = 8;

  DatasetBuilder(const tok::Vocabulary& vocab, const KeywordIndex& keywords, MaskingConfig cfg,
                 std::size_t max_len = 512, unsigned threads = 1, std::size_t max_word_chars = 100)
      : vocab_(&vocab), encoder_(vocab, max_word_chars), keywords_(&keywords), cfg_(cfg),
        max_len_(max_len), threads_(threads) {
    cfg_.validate();
    if (!vocab.has_standard_specials()) throw InputError("masking needs specials at ids 0-4");
  }

  std::vector<MaskedExample> process(std::span<const Document> batch) {
    std::vector<EncodedDocument> encoded(batch.size());
    parallel_for(batch.size(), threads_, [&](std::size_t i) {
      encoded[i] = encode_document(batch[i], encoder_, *keywords_);
    });
    std::vector<PackedWindow> windows;
    for (const auto& doc : encoded) {
      for (auto& w : pack_windows(doc, max_len_)) {
        ++stats_.windows;
        if (w.ids.size() - 2 < kMinMaskable) {
          ++stats_.skipped_windows;
          continue;
        }
        windows.push_back(std::move(w));
      }
    }
    stats_.documents += batch.size();

    std::vector<MaskedExample> out(windows.size());
    const std::uint64_t base = ordinal_;
    parallel_for(windows.size(), threads_, [&](std::size_t i) {
      Rng rng(derive_seed(cfg_.seed, base + i));
      out[i] = mask_sequence(windows[i].ids, windows[i].word_starts, windows[i].keyword_spans, cfg_,
                             rng, vocab_->size());
    });
    ordinal_ += windows.size();
    for (const auto& ex : out) stats_.add(ex);
    return out;
  }

  const DatasetStats& stats() const { return stats_; }
  const MaskingConfig& config() const { return cfg_; }
  std::size_t max_len() const { return max_len_; }

 private:
  const tok::Vocabulary* vocab_;
  tok::WordPieceEncoder encoder_;
  const KeywordIndex* keywords_;
  MaskingConfig cfg_;
  std::size_t max_len_;
  unsigned threads_;
  std::uint64_t ordinal_ = 0;
  DatasetStats stats_;
};

inline std::vector<MaskedExample> build_dataset(const std::vector<Document>& docs,
                                                const tok::Vocabulary& vocab,
                                                const KeywordIndex& keywords,
                                                const MaskingConfig& cfg, std::size_t max_len = 512,
                                                unsigned threads = 1) {
  DatasetBuilder b(vocab, keywords, cfg, max_len, threads);
  return b.process(docs);
}

}  // namespace forge::mask
