#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/corpus.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge::tok {

using TokenId = std::int32_t;

inline constexpr std::string_view kContinuation = "##";
inline constexpr std::array<std::string_view, 5> kSpecialTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

namespace special {
inline constexpr TokenId pad = 0;
inline constexpr TokenId unk = 1;
inline constexpr TokenId cls = 2;
inline constexpr TokenId sep = 3;
inline constexpr TokenId mask = 4;
inline constexpr TokenId count = 5;
}  // namespace special

inline bool is_continuation(std::string_view tok) { return tok.starts_with(kContinuation); }

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

/// Ordered subword inventory. Line number in vocab.txt is the token id.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// With require_specials, ids 0-4 must hold [PAD] [UNK] [CLS] [SEP] [MASK].
  /// Vocabularies of other models (used for overlap analysis) skip that check.
  static Vocabulary from_tokens(std::vector<std::string> tokens, bool require_specials = true) {
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    v.index_.reserve(v.tokens_.size());
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
      const std::string& t = v.tokens_[i];
      if (t.empty()) throw InputError("empty token at id " + std::to_string(i));
      if (!v.index_.emplace(t, static_cast<TokenId>(i)).second) {
        throw InputError("duplicate token '" + t + "'");
      }
      v.max_token_bytes_ = std::max(v.max_token_bytes_, t.size());
    }
    if (require_specials && !v.has_standard_specials()) {
      throw InputError("vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]");
    }
    return v;
  }

  static Vocabulary load(const std::filesystem::path& path, bool require_specials = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    try {
      return from_tokens(std::move(tokens), require_specials);
    } catch (const InputError& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write vocabulary: " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
  }

  std::optional<TokenId> find(std::string_view tok) const {
    auto it = index_.find(tok);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view tok) const { return index_.find(tok) != index_.end(); }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t max_token_bytes() const { return max_token_bytes_; }

  bool has_standard_specials() const {
    if (tokens_.size() < kSpecialTokens.size()) return false;
    for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
      if (tokens_[i] != kSpecialTokens[i]) return false;
    }
    return true;
  }

  bool is_special(TokenId id) const {
    return has_standard_specials() && id >= 0 && id < special::count;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> index_;
  std::size_t max_token_bytes_ = 0;
};

/// Greedy longest-match-first WordPiece over whitespace-split words.
class WordPieceEncoder {
 public:
  explicit WordPieceEncoder(const Vocabulary& vocab, std::size_t max_word_chars = 100)
      : vocab_(&vocab), max_word_chars_(max_word_chars) {
    unk_ = vocab.find("[UNK]").value_or(special::unk);
  }

  /// Appends the pieces of one already-normalized word.
  void encode_word(std::string_view word, std::vector<TokenId>& out) const {
    const auto b = text::codepoint_boundaries(word);
    const std::size_t cps = b.size() - 1;
    if (cps == 0) return;
    if (cps > max_word_chars_) {
      out.push_back(unk_);
      return;
    }
    const std::size_t mark = out.size();
    std::string key;
    std::size_t start = 0;
    while (start < cps) {
      std::optional<TokenId> hit;
      std::size_t end = cps;
      for (; end > start; --end) {
        const std::size_t bytes = b[end] - b[start] + (start ? kContinuation.size() : 0);
        if (bytes > vocab_->max_token_bytes()) continue;
        key.clear();
        if (start) key.append(kContinuation);
        key.append(word.substr(b[start], b[end] - b[start]));
        if ((hit = vocab_->find(key))) break;
      }
      if (!hit) {
        out.resize(mark);
        out.push_back(unk_);
        return;
      }
      out.push_back(*hit);
      start = end;
    }
  }

  /// Token ids for normalized text plus the number of words encoded.
  std::vector<TokenId> encode_ids(std::string_view raw, std::size_t* words = nullptr) const {
    const std::string norm = text::normalize_text(raw);
    std::vector<TokenId> ids;
    const auto ws = text::split_whitespace(norm);
    for (auto w : ws) encode_word(w, ids);
    if (words) *words = ws.size();
    return ids;
  }

  std::vector<std::string> encode(std::string_view raw) const {
    std::vector<std::string> out;
    for (TokenId id : encode_ids(raw)) out.push_back(vocab_->token(id));
    return out;
  }

  const Vocabulary& vocab() const { return *vocab_; }
  std::size_t max_word_chars() const { return max_word_chars_; }

 private:
  const Vocabulary* vocab_;
  std::size_t max_word_chars_;
  TokenId unk_;
};

inline std::vector<std::string> encode(const Vocabulary& v, std::string_view text) {
  return WordPieceEncoder(v).encode(text);
}

struct TokenizerConfig {
  std::size_t vocab_size = 48000;
  std::size_t min_frequency = 2;
  std::vector<std::string> seed_terms;
  std::size_t max_word_chars = 100;

  void validate() const {
    if (vocab_size <= kSpecialTokens.size() + seed_terms.size()) {
      throw ConfigError("vocab_size must exceed the special tokens plus seed terms (" +
                        std::to_string(kSpecialTokens.size() + seed_terms.size()) + ")");
    }
    if (max_word_chars == 0) throw ConfigError("max_word_chars must be positive");
    for (const auto& s : seed_terms) {
      if (s.empty()) throw ConfigError("empty seed term");
      if (text::split_whitespace(s).size() != 1 || text::trim(s) != s) {
        throw ConfigError("seed term '" + s + "' is not a single word");
      }
      if (is_continuation(s)) throw ConfigError("seed term '" + s + "' uses the continuation prefix");
    }
  }
};

struct SeedTermFile {
  std::vector<std::string> terms;
  std::size_t skipped_multiword = 0;
};

/// One term per line. Terms are NFC-normalized; lines holding more than one
/// word cannot become a single token and are skipped.
inline SeedTermFile load_seed_terms(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open seed term file: " + path.string());
  SeedTermFile out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = text::normalize_text(line);
    if (t.empty()) continue;
    if (t.find(' ') != std::string::npos || is_continuation(t)) {
      ++out.skipped_multiword;
      continue;
    }
    if (seen.insert(t).second) out.terms.push_back(t);
  }
  return out;
}

/// Word frequencies in byte order, so training input is deterministic.
using WordCounts = std::map<std::string, std::uint64_t>;

inline void count_words(std::string_view raw, std::unordered_map<std::string, std::uint64_t>& counts) {
  const std::string norm = text::normalize_text(raw);
  for (auto w : text::split_whitespace(norm)) ++counts[std::string(w)];
}

inline WordCounts count_corpus_words(const std::vector<Document>& docs, unsigned threads = 1) {
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(threads, docs.size()));
  std::vector<std::unordered_map<std::string, std::uint64_t>> partial(shards);
  const std::size_t per = (docs.size() + shards - 1) / std::max<std::size_t>(1, shards);
  parallel_for(shards, threads, [&](std::size_t s) {
    const std::size_t lo = s * per;
    const std::size_t hi = std::min(docs.size(), lo + per);
    for (std::size_t i = lo; i < hi; ++i) count_words(docs[i].text, partial[s]);
  });
  WordCounts out;
  for (auto& p : partial) {
    for (auto& [w, c] : p) out[w] += c;
  }
  return out;
}

struct TrainResult {
  Vocabulary vocab;
  std::size_t requested_size = 0;
  std::size_t alphabet_size = 0;
  std::size_t seed_count = 0;
  std::size_t learned_merges = 0;
  std::size_t merges_into_existing = 0;

  bool filled() const { return vocab.size() == requested_size; }

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"requested_size", requested_size},
            {"actual_size", vocab.size()},
            {"filled", filled()},
            {"alphabet_size", alphabet_size},
            {"seed_terms", seed_count},
            {"learned_tokens", learned_merges},
            {"merges_into_existing_tokens", merges_into_existing}};
  }
};

namespace detail {

// Per-word initial segmentation: first character plain, the rest "##"-prefixed.
inline std::vector<std::string> char_symbols(std::string_view word) {
  std::vector<std::string> out;
  text::for_each_codepoint(word, [&](UChar32, std::size_t off, std::size_t len) {
    std::string s;
    if (off) s.append(kContinuation);
    s.append(word.substr(off, len));
    out.push_back(std::move(s));
  });
  return out;
}

inline std::string merged_string(std::string_view left, std::string_view right) {
  std::string s(left);
  s.append(is_continuation(right) ? right.substr(kContinuation.size()) : right);
  return s;
}

// Pair selection score of WordPiece: count(ab) / (count(a) * count(b)).
inline double pair_score(std::uint64_t pair, std::uint64_t left, std::uint64_t right) {
  return static_cast<double>(pair) / (static_cast<double>(left) * static_cast<double>(right));
}

class MergeTrainer {
 public:
  MergeTrainer(const WordCounts& counts, const std::vector<std::string>& alphabet,
               const std::unordered_set<std::string>& excluded, std::uint64_t min_frequency)
      : min_freq_(std::max<std::uint64_t>(1, min_frequency)) {
    for (const auto& a : alphabet) intern(a);
    for (const auto& [word, count] : counts) {
      if (excluded.count(word)) continue;
      std::vector<std::int32_t> syms;
      bool ok = true;
      for (auto& s : char_symbols(word)) {
        auto it = ids_.find(s);
        if (it == ids_.end()) {
          ok = false;
          break;
        }
        syms.push_back(it->second);
      }
      if (!ok || syms.empty()) continue;
      words_.push_back({std::move(syms), count});
    }
    for (std::uint32_t w = 0; w < words_.size(); ++w) add_word(w);
    rebuild_heap();
  }

  // The heap comparator points back at this object.
  MergeTrainer(const MergeTrainer&) = delete;
  MergeTrainer& operator=(const MergeTrainer&) = delete;

  struct Merge {
    std::string token;
  };

  // Applies the best remaining merge; nullopt when none reaches min frequency.
  std::optional<Merge> step() {
    while (!heap_.empty()) {
      const Entry e = heap_.top();
      heap_.pop();
      const std::uint64_t count = pair_count(e.key);
      if (count < min_freq_) continue;
      if (score(e.key) != e.score) continue;  // stale
      return apply(e.key);
    }
    return std::nullopt;
  }

 private:
  struct Word {
    std::vector<std::int32_t> syms;
    std::uint64_t count;
  };
  struct Entry {
    double score;
    std::uint64_t key;
  };

  static std::uint64_t key_of(std::int32_t a, std::int32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  }
  static std::int32_t left_of(std::uint64_t k) { return static_cast<std::int32_t>(k >> 32); }
  static std::int32_t right_of(std::uint64_t k) { return static_cast<std::int32_t>(k & 0xffffffffu); }

  std::int32_t intern(const std::string& s) {
    auto [it, fresh] = ids_.try_emplace(s, static_cast<std::int32_t>(strs_.size()));
    if (fresh) {
      strs_.push_back(s);
      sym_freq_.push_back(0);
      sym_pairs_.emplace_back();
    }
    return it->second;
  }

  std::uint64_t pair_count(std::uint64_t k) const {
    auto it = pair_counts_.find(k);
    return it == pair_counts_.end() ? 0 : it->second;
  }

  double score(std::uint64_t k) const {
    return pair_score(pair_count(k), sym_freq_[left_of(k)], sym_freq_[right_of(k)]);
  }

  // Strict ordering: higher score first, then merged string, then left piece.
  struct Before {
    const MergeTrainer* t;
    bool operator()(const Entry& x, const Entry& y) const {
      if (x.score != y.score) return x.score < y.score;
      if (x.key == y.key) return false;
      const std::string mx = merged_string(t->strs_[left_of(x.key)], t->strs_[right_of(x.key)]);
      const std::string my = merged_string(t->strs_[left_of(y.key)], t->strs_[right_of(y.key)]);
      if (mx != my) return mx > my;
      return t->strs_[left_of(x.key)] > t->strs_[left_of(y.key)];
    }
  };

  void add_word(std::uint32_t w) {
    const Word& word = words_[w];
    for (std::size_t i = 0; i < word.syms.size(); ++i) {
      sym_freq_[word.syms[i]] += word.count;
      if (i + 1 < word.syms.size()) {
        const std::uint64_t k = key_of(word.syms[i], word.syms[i + 1]);
        auto& c = pair_counts_[k];
        if (c == 0) {
          sym_pairs_[word.syms[i]].insert(k);
          sym_pairs_[word.syms[i + 1]].insert(k);
        }
        c += word.count;
        pair_words_[k].push_back(w);
      }
    }
  }

  void remove_word(std::uint32_t w) {
    const Word& word = words_[w];
    for (std::size_t i = 0; i < word.syms.size(); ++i) {
      sym_freq_[word.syms[i]] -= word.count;
      if (i + 1 < word.syms.size()) {
        const std::uint64_t k = key_of(word.syms[i], word.syms[i + 1]);
        auto it = pair_counts_.find(k);
        it->second -= word.count;
        if (it->second == 0) {
          pair_counts_.erase(it);
          sym_pairs_[word.syms[i]].erase(k);
          sym_pairs_[word.syms[i + 1]].erase(k);
          pair_words_.erase(k);
        }
      }
    }
  }

  void push(std::uint64_t k) { heap_.push({score(k), k}); }

  void rebuild_heap() {
    heap_ = Heap(Before{this});
    for (const auto& [k, c] : pair_counts_) push(k);
  }

  Merge apply(std::uint64_t k) {
    const std::int32_t a = left_of(k);
    const std::int32_t b = right_of(k);
    const std::string token = merged_string(strs_[a], strs_[b]);
    const std::int32_t c = intern(token);

    std::vector<std::uint32_t> touched = pair_words_[k];
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (std::uint32_t w : touched) {
      const auto& syms = words_[w].syms;
      bool has = false;
      for (std::size_t i = 0; i + 1 < syms.size() && !has; ++i) has = syms[i] == a && syms[i + 1] == b;
      if (!has) continue;
      remove_word(w);
      std::vector<std::int32_t> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
          next.push_back(c);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      words_[w].syms = std::move(next);
      add_word(w);
    }

    // Scores can rise only for pairs whose member frequencies changed.
    for (std::int32_t s : {a, b, c}) {
      for (std::uint64_t p : sym_pairs_[s]) push(p);
    }
    if (heap_.size() > 4 * pair_counts_.size() + 4096) rebuild_heap();
    return {token};
  }

  using Heap = std::priority_queue<Entry, std::vector<Entry>, Before>;

  std::uint64_t min_freq_;
  std::vector<std::string> strs_;
  std::unordered_map<std::string, std::int32_t> ids_;
  std::vector<std::uint64_t> sym_freq_;
  std::vector<std::unordered_set<std::uint64_t>> sym_pairs_;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words_;
  std::vector<Word> words_;
  Heap heap_{Before{this}};
};

}  // namespace detail

/// Builds a WordPiece vocabulary of at most cfg.vocab_size entries:
/// specials, seed terms (atomic, word-initial), the character alphabet with
/// frequency >= min_frequency, then learned merges in score order. Words
/// equal to a seed term are already single tokens and do not feed merge
/// statistics. A corpus too small to fill the budget yields a smaller
/// vocabulary; check TrainResult::filled().
inline TrainResult train_wordpiece(const WordCounts& counts, const TokenizerConfig& cfg) {
  cfg.validate();
  if (counts.empty()) throw InputError("cannot train a tokenizer on an empty corpus");

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  std::unordered_set<std::string> seeds;
  TrainResult result;
  result.requested_size = cfg.vocab_size;
  for (const auto& raw : cfg.seed_terms) {
    std::string s = text::nfc(raw);
    if (present.insert(s).second) {
      tokens.push_back(s);
      ++result.seed_count;
    }
    seeds.insert(std::move(s));
  }

  std::map<std::string, std::uint64_t> char_freq;
  for (const auto& [word, count] : counts) {
    if (seeds.count(word) || text::codepoint_count(word) > cfg.max_word_chars) continue;
    for (auto& s : detail::char_symbols(word)) char_freq[s] += count;
  }
  std::vector<std::string> alphabet;
  for (const auto& [s, f] : char_freq) {
    if (f >= cfg.min_frequency) alphabet.push_back(s);
  }
  for (const auto& s : alphabet) {
    if (present.insert(s).second) {
      tokens.push_back(s);
      ++result.alphabet_size;
    }
  }
  if (tokens.size() > cfg.vocab_size) {
    throw ConfigError("vocab_size " + std::to_string(cfg.vocab_size) +
                      " is smaller than specials + seed terms + alphabet (" +
                      std::to_string(tokens.size()) + ")");
  }

  WordCounts trainable;
  for (const auto& [word, count] : counts) {
    if (text::codepoint_count(word) <= cfg.max_word_chars) trainable.emplace(word, count);
  }
  detail::MergeTrainer trainer(trainable, alphabet, seeds, cfg.min_frequency);
  while (tokens.size() < cfg.vocab_size) {
    auto m = trainer.step();
    if (!m) break;
    if (present.insert(m->token).second) {
      tokens.push_back(std::move(m->token));
      ++result.learned_merges;
    } else {
      ++result.merges_into_existing;
    }
  }
  result.vocab = Vocabulary::from_tokens(std::move(tokens));
  return result;
}

/// Subword fragmentation totals over a set of lines.
struct FragmentationReport {
  std::uint64_t total_lines = 0;
  std::uint64_t total_words = 0;
  std::uint64_t total_subwords = 0;

  double avg_subwords_per_line() const {
    return total_lines ? static_cast<double>(total_subwords) / static_cast<double>(total_lines) : 0.0;
  }
  double avg_subwords_per_word() const {
    return total_words ? static_cast<double>(total_subwords) / static_cast<double>(total_words) : 0.0;
  }

  void merge(const FragmentationReport& o) {
    total_lines += o.total_lines;
    total_words += o.total_words;
    total_subwords += o.total_subwords;
  }

  bool operator==(const FragmentationReport&) const = default;

  nlohmann::json to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"avg_subwords_per_line", avg_subwords_per_line()},
            {"avg_subwords_per_word", avg_subwords_per_word()},
            {"total_lines", total_lines},
            {"total_words", total_words},
            {"total_subwords", total_subwords},
            {"line_definition", "each non-blank \\n-delimited line"}};
  }
};

/// Accumulates every non-blank '\n'-delimited line of text.
inline void add_lines(const WordPieceEncoder& enc, std::string_view text, FragmentationReport& r) {
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::size_t words = 0;
    const auto ids = enc.encode_ids(text.substr(pos, nl - pos), &words);
    if (words > 0) {
      r.total_lines += 1;
      r.total_words += words;
      r.total_subwords += ids.size();
    }
    pos = nl + 1;
  }
}

template <typename Lines>
FragmentationReport fragmentation_report(const Vocabulary& v, const Lines& lines,
                                         std::size_t max_word_chars = 100) {
  const WordPieceEncoder enc(v, max_word_chars);
  FragmentationReport r;
  for (const auto& line : lines) add_lines(enc, line, r);
  if (r.total_lines == 0) throw InputError("fragmentation report needs at least one non-blank line");
  return r;
}

}  // namespace forge::tok
