#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"

namespace forge::seg {

enum class Segment : std::uint8_t { header, formal, claim, defense, reasoning, ruling, footer, dissent };
inline constexpr std::size_t kSegmentCount = 8;
inline constexpr std::array<std::string_view, kSegmentCount> kSegmentNames = {
    "header", "formal", "claim", "defense", "reasoning", "ruling", "footer", "dissent"};

inline std::string_view to_string(Segment s) { return kSegmentNames[static_cast<std::size_t>(s)]; }

struct Tag {
  enum class Kind : std::uint8_t { O, B, I };
  Kind kind = Kind::O;
  Segment segment = Segment::header;  // ignored when kind == O

  static Tag outside() { return {}; }
  static Tag begin(Segment s) { return {Kind::B, s}; }
  static Tag inside(Segment s) { return {Kind::I, s}; }

  bool operator==(const Tag& o) const {
    return kind == o.kind && (kind == Kind::O || segment == o.segment);
  }
};

inline Tag parse_tag(std::string_view s) {
  if (s == "O") return Tag::outside();
  if (s.size() > 2 && s[1] == '-' && (s[0] == 'B' || s[0] == 'I')) {
    const auto name = s.substr(2);
    for (std::size_t i = 0; i < kSegmentCount; ++i) {
      if (kSegmentNames[i] == name) {
        const auto seg = static_cast<Segment>(i);
        return s[0] == 'B' ? Tag::begin(seg) : Tag::inside(seg);
      }
    }
  }
  throw InputError("unknown tag '" + std::string(s) + "'");
}

inline std::string to_string(const Tag& t) {
  switch (t.kind) {
    case Tag::Kind::O: return "O";
    case Tag::Kind::B: return "B-" + std::string(to_string(t.segment));
    case Tag::Kind::I: return "I-" + std::string(to_string(t.segment));
  }
  return "O";
}

/// Word-level BIO labels for one document.
struct TagSequence {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<Tag> tags;
};

inline TagSequence parse_tag_sequence(const nlohmann::json& j) {
  TagSequence s;
  try {
    s.doc_id = j.at("doc_id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& t : j.at("tags")) s.tags.push_back(parse_tag(t.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad tag sequence: ") + e.what());
  }
  if (s.tags.size() != s.tokens.size()) {
    throw InputError("document '" + s.doc_id + "' has " + std::to_string(s.tokens.size()) +
                     " tokens but " + std::to_string(s.tags.size()) + " tags");
  }
  return s;
}

inline nlohmann::json to_json(const TagSequence& s) {
  std::vector<std::string> tags;
  tags.reserve(s.tags.size());
  for (const auto& t : s.tags) tags.push_back(to_string(t));
  return {{"doc_id", s.doc_id}, {"tokens", s.tokens}, {"tags", tags}};
}

inline std::vector<TagSequence> read_tag_sequences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<TagSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_tag_sequence(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sliding windows

struct WindowConfig {
  std::size_t size = 512;
  std::size_t stride = 256;

  void validate() const {
    if (size == 0 || stride == 0 || stride > size) throw ConfigError("window needs 0 < stride <= size");
  }
};

struct TokenWindow {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const { return start + length; }
  bool operator==(const TokenWindow&) const = default;
};

/// Windows start at multiples of the stride; the last one is the first
/// window that reaches the end of the document and may be shorter.
inline std::vector<TokenWindow> window_split(std::size_t token_count, const WindowConfig& cfg) {
  cfg.validate();
  if (token_count == 0) throw InputError("cannot window an empty token list");
  std::vector<TokenWindow> out;
  for (std::size_t start = 0;; start += cfg.stride) {
    const std::size_t len = std::min(cfg.size, token_count - start);
    out.push_back({start, len});
    if (start + len >= token_count) break;
  }
  return out;
}

/// Each token takes its value from the covering window in which it is
/// farthest from a window edge; ties go to the earlier window.
template <typename T>
std::vector<T> merge_window_predictions(std::size_t doc_length, std::span<const TokenWindow> windows,
                                        std::span<const std::vector<T>> window_values) {
  if (windows.size() != window_values.size()) throw InputError("window/prediction count mismatch");
  std::vector<T> out(doc_length);
  std::vector<std::ptrdiff_t> best(doc_length, -1);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    if (window_values[w].size() != win.length || win.end() > doc_length) {
      throw InputError("window " + std::to_string(w) + " does not match the document length");
    }
    for (std::size_t k = 0; k < win.length; ++k) {
      const auto dist = static_cast<std::ptrdiff_t>(std::min(k, win.length - 1 - k));
      const std::size_t pos = win.start + k;
      if (dist > best[pos]) {
        best[pos] = dist;
        out[pos] = window_values[w][k];
      }
    }
  }
  for (std::size_t i = 0; i < doc_length; ++i) {
    if (best[i] < 0) throw InputError("token " + std::to_string(i) + " is not covered by any window");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spans

struct Span {
  Segment label = Segment::header;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  auto operator<=>(const Span&) const = default;
};

/// Rewrites orphan I-x (after O or a different type, or at position 0) to
/// B-x; returns the number of repairs.
inline std::size_t repair_bio(std::vector<Tag>& tags) {
  std::size_t repairs = 0;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind != Tag::Kind::I) continue;
    const bool continues = i > 0 && tags[i - 1].kind != Tag::Kind::O && tags[i - 1].segment == tags[i].segment;
    if (!continues) {
      tags[i].kind = Tag::Kind::B;
      ++repairs;
    }
  }
  return repairs;
}

inline std::size_t count_bio_violations(std::span<const Tag> tags) {
  std::vector<Tag> copy(tags.begin(), tags.end());
  return repair_bio(copy);
}

/// Maximal B-x I-x* runs, after canonical repair.
inline std::vector<Span> extract_spans(std::span<const Tag> raw) {
  std::vector<Tag> tags(raw.begin(), raw.end());
  repair_bio(tags);
  std::vector<Span> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].kind == Tag::Kind::B) {
      out.push_back({tags[i].segment, i, i + 1});
    } else if (tags[i].kind == Tag::Kind::I) {
      out.back().end = i + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct PrfCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  // Empty gold and empty prediction counts as perfect agreement.
  double precision() const {
    if (tp + fp == 0) return tp + fn == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double recall() const {
    if (tp + fn == 0) return tp + fp == 0 ? 1.0 : 0.0;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  bool empty() const { return tp + fp + fn == 0; }

  PrfCounts& operator+=(const PrfCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const PrfCounts&) const = default;
};

inline void check_lengths(std::span<const Tag> gold, std::span<const Tag> pred) {
  if (gold.size() != pred.size()) {
    throw InputError("gold has " + std::to_string(gold.size()) + " tags but prediction has " +
                     std::to_string(pred.size()));
  }
}

/// Strict pass: identical span sets (labels, starts and ends).
inline bool doc_pass_strict(std::span<const Tag> gold, std::span<const Tag> pred) {
  check_lengths(gold, pred);
  return extract_spans(gold) == extract_spans(pred);
}

/// Tolerant pass: per label, span starts can be paired one-to-one within
/// +-tolerance tokens, and likewise span ends.
inline bool doc_pass_tolerant(std::span<const Tag> gold, std::span<const Tag> pred, std::size_t tolerance) {
  check_lengths(gold, pred);
  const auto gs = extract_spans(gold);
  const auto ps = extract_spans(pred);
  for (std::size_t label = 0; label < kSegmentCount; ++label) {
    for (int edge = 0; edge < 2; ++edge) {
      std::vector<std::size_t> g;
      std::vector<std::size_t> p;
      for (const auto& s : gs) {
        if (static_cast<std::size_t>(s.label) == label) g.push_back(edge ? s.end : s.start);
      }
      for (const auto& s : ps) {
        if (static_cast<std::size_t>(s.label) == label) p.push_back(edge ? s.end : s.start);
      }
      if (g.size() != p.size()) return false;
      // On a line, sorted order minimizes the largest pairing distance.
      std::sort(g.begin(), g.end());
      std::sort(p.begin(), p.end());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t d = g[i] > p[i] ? g[i] - p[i] : p[i] - g[i];
        if (d > tolerance) return false;
      }
    }
  }
  return true;
}

inline bool doc_pass(std::span<const Tag> gold, std::span<const Tag> pred, std::size_t tolerance = 0) {
  return tolerance == 0 ? doc_pass_strict(gold, pred) : doc_pass_tolerant(gold, pred, tolerance);
}

struct BoundaryCounts {
  std::array<PrfCounts, kSegmentCount> per_label{};
  PrfCounts micro;
  std::uint64_t gold_boundaries = 0;
  std::uint64_t matched_exact = 0;     // same position, same label
  std::uint64_t matched_position = 0;  // same position, any label

  BoundaryCounts& operator+=(const BoundaryCounts& o) {
    for (std::size_t i = 0; i < kSegmentCount; ++i) per_label[i] += o.per_label[i];
    micro += o.micro;
    gold_boundaries += o.gold_boundaries;
    matched_exact += o.matched_exact;
    matched_position += o.matched_position;
    return *this;
  }

  double bnd_acc() const {
    return gold_boundaries ? static_cast<double>(matched_exact) / static_cast<double>(gold_boundaries) : 1.0;
  }
  double bnd_acc_position_only() const {
    return gold_boundaries ? static_cast<double>(matched_position) / static_cast<double>(gold_boundaries)
                           : 1.0;
  }
};

/// B-tag agreement after canonical repair of both sequences.
inline BoundaryCounts boundary_counts(std::span<const Tag> gold_raw, std::span<const Tag> pred_raw) {
  check_lengths(gold_raw, pred_raw);
  std::vector<Tag> gold(gold_raw.begin(), gold_raw.end());
  std::vector<Tag> pred(pred_raw.begin(), pred_raw.end());
  repair_bio(gold);
  repair_bio(pred);
  BoundaryCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool gb = gold[i].kind == Tag::Kind::B;
    const bool pb = pred[i].kind == Tag::Kind::B;
    if (gb) {
      ++c.gold_boundaries;
      if (pb) ++c.matched_position;
    }
    if (gb && pb && gold[i].segment == pred[i].segment) {
      ++c.per_label[static_cast<std::size_t>(gold[i].segment)].tp;
      ++c.matched_exact;
      continue;
    }
    if (gb) ++c.per_label[static_cast<std::size_t>(gold[i].segment)].fn;
    if (pb) ++c.per_label[static_cast<std::size_t>(pred[i].segment)].fp;
  }
  for (const auto& l : c.per_label) c.micro += l;
  return c;
}

inline PrfCounts span_counts(std::span<const Tag> gold, std::span<const Tag> pred) {
  check_lengths(gold, pred);
  const auto gs = extract_spans(gold);
  const auto ps = extract_spans(pred);
  PrfCounts c;
  std::size_t i = 0;
  std::size_t j = 0;
  // Both lists are sorted by start and spans within a list never share a start.
  while (i < gs.size() && j < ps.size()) {
    if (gs[i].start == ps[j].start) {
      c.tp += gs[i] == ps[j];
      ++i;
      ++j;
    } else if (gs[i].start < ps[j].start) {
      ++i;
    } else {
      ++j;
    }
  }
  c.fp = ps.size() - c.tp;
  c.fn = gs.size() - c.tp;
  return c;
}

inline double span_exact_f1(std::span<const Tag> gold, std::span<const Tag> pred) {
  return span_counts(gold, pred).f1();
}

struct CollapsedCounts {
  std::array<PrfCounts, kSegmentCount> per_class{};

  CollapsedCounts& operator+=(const CollapsedCounts& o) {
    for (std::size_t i = 0; i < kSegmentCount; ++i) per_class[i] += o.per_class[i];
    return *this;
  }
};

/// Token-level counts with B-x and I-x merged into x; O is not a class.
inline CollapsedCounts collapsed_counts(std::span<const Tag> gold, std::span<const Tag> pred) {
  check_lengths(gold, pred);
  CollapsedCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool go = gold[i].kind == Tag::Kind::O;
    const bool po = pred[i].kind == Tag::Kind::O;
    if (!go && !po && gold[i].segment == pred[i].segment) {
      ++c.per_class[static_cast<std::size_t>(gold[i].segment)].tp;
      continue;
    }
    if (!go) ++c.per_class[static_cast<std::size_t>(gold[i].segment)].fn;
    if (!po) ++c.per_class[static_cast<std::size_t>(pred[i].segment)].fp;
  }
  return c;
}

enum class Averaging { macro, weighted };

struct CollapsedF1 {
  double average = 0.0;
  // Classes that occur in gold or prediction; others are left out.
  std::map<std::string, double> per_segment;
};

/// Macro: unweighted mean over present classes. Weighted: mean weighted by
/// gold support (tp + fn).
inline CollapsedF1 collapsed_f1(const CollapsedCounts& c, Averaging avg) {
  CollapsedF1 out;
  double num = 0;
  double den = 0;
  for (std::size_t k = 0; k < kSegmentCount; ++k) {
    const auto& pc = c.per_class[k];
    if (pc.empty()) continue;
    const double f = pc.f1();
    out.per_segment[std::string(kSegmentNames[k])] = f;
    const double w = avg == Averaging::macro ? 1.0 : static_cast<double>(pc.tp + pc.fn);
    num += w * f;
    den += w;
  }
  out.average = den > 0 ? num / den : (out.per_segment.empty() ? 1.0 : 0.0);
  return out;
}

inline CollapsedF1 collapsed_f1(std::span<const Tag> gold, std::span<const Tag> pred, Averaging avg) {
  return collapsed_f1(collapsed_counts(gold, pred), avg);
}

struct DocResult {
  std::string doc_id;
  bool pass = false;
  bool tol_pass = false;
};

struct SegReport {
  std::size_t n_docs = 0;
  std::size_t tolerance = 5;
  double doc_pass = 0.0;
  double tol_pass = 0.0;
  double bnd_acc = 0.0;
  double bnd_acc_position_only = 0.0;
  double bnd_precision = 0.0;
  double bnd_recall = 0.0;
  double bnd_f1 = 0.0;
  double span_exact_f1 = 0.0;
  double collapsed_macro_f1 = 0.0;
  double collapsed_weighted_f1 = 0.0;
  std::map<std::string, PrfCounts> per_label;  // B-tag counts, labels seen in gold or prediction
  std::map<std::string, double> per_segment_collapsed_f1;
  std::size_t gold_repairs = 0;
  std::size_t pred_repairs = 0;
  std::vector<DocResult> docs;  // by doc_id

  nlohmann::json to_json() const {
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [k, c] : per_label) {
      labels["B-" + k] = {{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                          {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    }
    nlohmann::json docs_j = nlohmann::json::array();
    for (const auto& d : docs) docs_j.push_back({{"doc_id", d.doc_id}, {"pass", d.pass}, {"tol_pass", d.tol_pass}});
    return {{"schema_version", kSchemaVersion},
            {"n_docs", n_docs},
            {"tolerance", tolerance},
            {"doc_pass", doc_pass},
            {"tol_pass", tol_pass},
            {"bnd_acc", bnd_acc},
            {"bnd_acc_position_only", bnd_acc_position_only},
            {"bnd_precision", bnd_precision},
            {"bnd_recall", bnd_recall},
            {"bnd_f1", bnd_f1},
            {"span_exact_f1", span_exact_f1},
            {"collapsed_macro_f1", collapsed_macro_f1},
            {"collapsed_weighted_f1", collapsed_weighted_f1},
            {"per_label", labels},
            {"per_segment_collapsed_f1", per_segment_collapsed_f1},
            {"repairs", {{"gold", gold_repairs}, {"pred", pred_repairs}}},
            {"docs", docs_j},
            {"definitions",
             {{"granularity", "word"},
              {"doc_pass", "identical span sets (label, start, end)"},
              {"tol_pass", "per-label one-to-one start and end matching within tolerance"},
              {"bnd_acc", "gold B-tags matched at the same position with the same label / gold B-tags"},
              {"bio_repair", "orphan I-x rewritten to B-x before scoring"}}}};
  }
};

/// Corpus-level report. Counts are summed across documents before ratios
/// are taken, so the result does not depend on document order.
inline SegReport evaluate_segmentation(std::span<const TagSequence> gold, std::span<const TagSequence> pred,
                                       std::size_t tolerance = 5) {
  std::unordered_map<std::string_view, const TagSequence*> pred_by_id;
  for (const auto& p : pred) {
    if (!pred_by_id.emplace(p.doc_id, &p).second) throw InputError("duplicate prediction doc_id '" + p.doc_id + "'");
  }
  std::vector<const TagSequence*> golds;
  std::unordered_map<std::string_view, int> seen;
  for (const auto& g : gold) {
    if (!seen.emplace(g.doc_id, 0).second) throw InputError("duplicate gold doc_id '" + g.doc_id + "'");
    if (!pred_by_id.count(g.doc_id)) throw InputError("missing prediction for '" + g.doc_id + "'");
    golds.push_back(&g);
  }
  if (pred.size() != gold.size()) throw InputError("prediction set has extra doc_ids");
  if (golds.empty()) throw InputError("no documents to evaluate");
  std::sort(golds.begin(), golds.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });

  SegReport r;
  r.tolerance = tolerance;
  r.n_docs = golds.size();
  BoundaryCounts bc;
  PrfCounts sc;
  CollapsedCounts cc;
  std::size_t strict = 0;
  std::size_t tolerant = 0;
  for (const auto* g : golds) {
    const auto* p = pred_by_id.at(g->doc_id);
    if (g->tags.size() != p->tags.size()) {
      throw InputError("length mismatch for '" + g->doc_id + "': " + std::to_string(g->tags.size()) + " vs " +
                       std::to_string(p->tags.size()));
    }
    DocResult d{g->doc_id, doc_pass_strict(g->tags, p->tags), doc_pass_tolerant(g->tags, p->tags, tolerance)};
    strict += d.pass;
    tolerant += d.tol_pass;
    r.docs.push_back(d);
    bc += boundary_counts(g->tags, p->tags);
    sc += span_counts(g->tags, p->tags);
    cc += collapsed_counts(g->tags, p->tags);
    r.gold_repairs += count_bio_violations(g->tags);
    r.pred_repairs += count_bio_violations(p->tags);
  }
  const double n = static_cast<double>(r.n_docs);
  r.doc_pass = static_cast<double>(strict) / n;
  r.tol_pass = static_cast<double>(tolerant) / n;
  r.bnd_acc = bc.bnd_acc();
  r.bnd_acc_position_only = bc.bnd_acc_position_only();
  r.bnd_precision = bc.micro.precision();
  r.bnd_recall = bc.micro.recall();
  r.bnd_f1 = bc.micro.f1();
  r.span_exact_f1 = sc.f1();
  for (std::size_t k = 0; k < kSegmentCount; ++k) {
    if (!bc.per_label[k].empty()) r.per_label[std::string(kSegmentNames[k])] = bc.per_label[k];
  }
  const auto macro = collapsed_f1(cc, Averaging::macro);
  r.collapsed_macro_f1 = macro.average;
  r.collapsed_weighted_f1 = collapsed_f1(cc, Averaging::weighted).average;
  r.per_segment_collapsed_f1 = macro.per_segment;
  return r;
}

}  // namespace forge::seg
