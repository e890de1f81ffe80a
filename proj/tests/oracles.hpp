#pragma once

// Brute-force reference implementations used as test oracles. They share
// no code with the library beyond the standard library.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace oracle {

inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) {
    if (c < 0x80) {
      out += static_cast<char>(c);
    } else if (c < 0x800) {
      out += static_cast<char>(0xC0 | (c >> 6));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else if (c < 0x10000) {
      out += static_cast<char>(0xE0 | (c >> 12));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (c >> 18));
      out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (c & 0x3F));
    }
  }
  return out;
}

/// Distinct code-point n-grams of an already-normalized string.
inline std::set<std::u32string> ngrams(std::string_view s, std::size_t n) {
  const auto cps = decode_utf8(s);
  std::set<std::u32string> out;
  for (std::size_t i = 0; i + n <= cps.size(); ++i) out.insert(cps.substr(i, n));
  return out;
}

template <typename T>
double jaccard(const std::set<T>& a, const std::set<T>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// ---------------------------------------------------------------------------
// WordPiece

inline std::vector<std::string> word_chars(const std::string& w) {
  std::vector<std::string> out;
  const auto cps = decode_utf8(w);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    out.push_back((i ? "##" : "") + encode_utf8(cps.substr(i, 1)));
  }
  return out;
}

inline std::string join_pieces(const std::string& l, const std::string& r) {
  return l + (r.rfind("##", 0) == 0 ? r.substr(2) : r);
}

/// Recounts every pair from scratch on each step; score comparisons use
/// exact integer cross-multiplication.
inline std::vector<std::string> naive_wordpiece(const std::map<std::string, std::uint64_t>& counts,
                                                std::size_t vocab_size, std::uint64_t min_freq,
                                                const std::vector<std::string>& seeds) {
  std::vector<std::string> vocab = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  std::set<std::string> have(vocab.begin(), vocab.end());
  std::set<std::string> seed_set(seeds.begin(), seeds.end());
  for (const auto& s : seeds) {
    if (have.insert(s).second) vocab.push_back(s);
  }
  std::map<std::string, std::uint64_t> char_freq;
  for (const auto& [w, c] : counts) {
    if (seed_set.count(w)) continue;
    for (const auto& ch : word_chars(w)) char_freq[ch] += c;
  }
  std::set<std::string> alphabet;
  for (const auto& [ch, f] : char_freq) {
    if (f >= min_freq) alphabet.insert(ch);
  }
  for (const auto& ch : alphabet) {
    if (have.insert(ch).second) vocab.push_back(ch);
  }
  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
  for (const auto& [w, c] : counts) {
    if (seed_set.count(w)) continue;
    auto pieces = word_chars(w);
    bool ok = true;
    for (const auto& p : pieces) ok = ok && alphabet.count(p);
    if (ok) words.push_back({pieces, c});
  }
  while (vocab.size() < vocab_size) {
    std::map<std::string, std::uint64_t> freq;
    std::map<std::pair<std::string, std::string>, std::uint64_t> pairs;
    for (const auto& [pieces, c] : words) {
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        freq[pieces[i]] += c;
        if (i + 1 < pieces.size()) pairs[{pieces[i], pieces[i + 1]}] += c;
      }
    }
    const std::pair<std::string, std::string>* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [p, c] : pairs) {
      if (c < std::max<std::uint64_t>(1, min_freq)) continue;
      if (!best) {
        best = &p;
        best_count = c;
        continue;
      }
      // c / (fl * fr) vs best_count / (bl * br)
      const unsigned __int128 lhs = static_cast<unsigned __int128>(c) * freq[best->first] * freq[best->second];
      const unsigned __int128 rhs = static_cast<unsigned __int128>(best_count) * freq[p.first] * freq[p.second];
      bool better = lhs > rhs;
      if (lhs == rhs) {
        const auto m1 = join_pieces(p.first, p.second);
        const auto m2 = join_pieces(best->first, best->second);
        better = m1 < m2 || (m1 == m2 && p.first < best->first);
      }
      if (better) {
        best = &p;
        best_count = c;
      }
    }
    if (!best) break;
    const auto [l, r] = *best;
    const std::string merged = join_pieces(l, r);
    for (auto& [pieces, c] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (i + 1 < pieces.size() && pieces[i] == l && pieces[i + 1] == r) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(pieces[i]);
        }
      }
      pieces = std::move(next);
    }
    if (have.insert(merged).second) vocab.push_back(merged);
  }
  return vocab;
}

/// Greedy longest-match-first over code points; [UNK] for the whole word on failure.
inline std::vector<std::string> naive_encode_word(const std::string& word, const std::set<std::string>& vocab,
                                                  std::size_t max_chars = 100) {
  const auto cps = decode_utf8(word);
  if (cps.size() > max_chars) return {"[UNK]"};
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::string found;
    for (std::size_t end = cps.size(); end > start; --end) {
      std::string cand = (start ? "##" : "") + encode_utf8(cps.substr(start, end - start));
      if (vocab.count(cand)) {
        found = cand;
        start = end;
        break;
      }
    }
    if (found.empty()) return {"[UNK]"};
    out.push_back(found);
  }
  return out;
}

struct Fragmentation {
  std::uint64_t lines = 0;
  std::uint64_t words = 0;
  std::uint64_t subwords = 0;
};

/// Lines split on '\n', words on ASCII whitespace.
inline Fragmentation naive_fragmentation(const std::set<std::string>& vocab, const std::vector<std::string>& texts) {
  Fragmentation f;
  for (const auto& t : texts) {
    std::stringstream ss(t);
    std::string line;
    while (std::getline(ss, line, '\n')) {
      std::istringstream ls(line);
      std::string w;
      std::uint64_t words = 0;
      std::uint64_t subs = 0;
      while (ls >> w) {
        ++words;
        subs += naive_encode_word(w, vocab).size();
      }
      if (words) {
        ++f.lines;
        f.words += words;
        f.subwords += subs;
      }
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Segmentation, on string tags ("O", "B-claim", "I-claim").

inline std::string tag_label(const std::string& t) { return t == "O" ? "" : t.substr(2); }

inline std::vector<std::string> repair(std::vector<std::string> tags) {
  std::string prev = "O";
  for (auto& t : tags) {
    if (t[0] == 'I' && (prev == "O" || tag_label(prev) != tag_label(t))) t = "B-" + tag_label(t);
    prev = t;
  }
  return tags;
}

using SpanT = std::tuple<std::string, std::size_t, std::size_t>;

inline std::vector<SpanT> run_scan(const std::vector<std::string>& raw) {
  const auto tags = repair(raw);
  std::vector<SpanT> out;
  std::string cur;
  std::size_t start = 0;
  auto close = [&](std::size_t end) {
    if (!cur.empty()) out.emplace_back(cur, start, end);
    cur.clear();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == "O") {
      close(i);
    } else if (tags[i][0] == 'B') {
      close(i);
      cur = tag_label(tags[i]);
      start = i;
    }
  }
  close(tags.size());
  return out;
}

// Kuhn's augmenting-path matching; true iff every gold point gets a partner.
inline bool perfect_match(const std::vector<std::size_t>& g, const std::vector<std::size_t>& p, std::size_t tol) {
  if (g.size() != p.size()) return false;
  std::vector<int> owner(p.size(), -1);
  std::function<bool(std::size_t, std::vector<char>&)> augment = [&](std::size_t u, std::vector<char>& seen) {
    for (std::size_t v = 0; v < p.size(); ++v) {
      const std::size_t d = g[u] > p[v] ? g[u] - p[v] : p[v] - g[u];
      if (d > tol || seen[v]) continue;
      seen[v] = 1;
      if (owner[v] < 0 || augment(static_cast<std::size_t>(owner[v]), seen)) {
        owner[v] = static_cast<int>(u);
        return true;
      }
    }
    return false;
  };
  for (std::size_t u = 0; u < g.size(); ++u) {
    std::vector<char> seen(p.size(), 0);
    if (!augment(u, seen)) return false;
  }
  return true;
}

struct Prf {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  double p() const { return tp + fp ? double(tp) / double(tp + fp) : (tp + fn ? 0.0 : 1.0); }
  double r() const { return tp + fn ? double(tp) / double(tp + fn) : (tp + fp ? 0.0 : 1.0); }
  double f() const { return p() + r() > 0 ? 2 * p() * r() / (p() + r()) : 0.0; }
};

struct SegDoc {
  std::string id;
  std::vector<std::string> tags;
};

struct SegReference {
  double doc_pass = 0, tol_pass = 0, bnd_acc = 0, bnd_acc_position = 0;
  double bnd_p = 0, bnd_r = 0, bnd_f1 = 0, span_f1 = 0, macro = 0, weighted = 0;
  std::map<std::string, Prf> per_label;
  std::map<std::string, double> per_segment;
};

inline SegReference seg_reference(const std::vector<SegDoc>& gold, const std::vector<SegDoc>& pred, std::size_t tol) {
  std::map<std::string, std::vector<std::string>> pm;
  for (const auto& d : pred) pm[d.id] = d.tags;
  SegReference ref;
  std::size_t strict = 0, tolerant = 0, gold_b = 0, match_exact = 0, match_pos = 0;
  Prf spans;
  std::map<std::pair<std::string, std::string>, std::uint64_t> confusion;
  for (const auto& gd : gold) {
    const auto g = repair(gd.tags);
    const auto p = repair(pm.at(gd.id));
    const auto gs = run_scan(gd.tags);
    const auto ps = run_scan(pm.at(gd.id));
    const std::set<SpanT> gset(gs.begin(), gs.end()), pset(ps.begin(), ps.end());
    strict += gset == pset;
    bool ok = true;
    std::set<std::string> labels;
    for (const auto& s : gs) labels.insert(std::get<0>(s));
    for (const auto& s : ps) labels.insert(std::get<0>(s));
    for (const auto& l : labels) {
      for (int edge = 0; edge < 2; ++edge) {
        std::vector<std::size_t> a, b;
        for (const auto& s : gs) if (std::get<0>(s) == l) a.push_back(edge ? std::get<2>(s) : std::get<1>(s));
        for (const auto& s : ps) if (std::get<0>(s) == l) b.push_back(edge ? std::get<2>(s) : std::get<1>(s));
        ok = ok && perfect_match(a, b, tol);
      }
    }
    tolerant += ok;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool gb = g[i][0] == 'B', pb = p[i][0] == 'B';
      if (gb) {
        ++gold_b;
        match_pos += pb;
        match_exact += pb && g[i] == p[i];
      }
      if (gb && pb && g[i] == p[i]) {
        ++ref.per_label[tag_label(g[i])].tp;
      } else {
        if (gb) ++ref.per_label[tag_label(g[i])].fn;
        if (pb) ++ref.per_label[tag_label(p[i])].fp;
      }
      confusion[{tag_label(g[i]), tag_label(p[i])}] += 1;
    }
    for (const auto& s : pset) spans.tp += gset.count(s);
    spans.fp += pset.size();
    spans.fn += gset.size();
  }
  spans.fp -= spans.tp;
  spans.fn -= spans.tp;
  const double n = static_cast<double>(gold.size());
  ref.doc_pass = strict / n;
  ref.tol_pass = tolerant / n;
  ref.bnd_acc = gold_b ? double(match_exact) / gold_b : 1.0;
  ref.bnd_acc_position = gold_b ? double(match_pos) / gold_b : 1.0;
  Prf micro;
  for (const auto& [l, c] : ref.per_label) {
    micro.tp += c.tp;
    micro.fp += c.fp;
    micro.fn += c.fn;
  }
  ref.bnd_p = micro.p();
  ref.bnd_r = micro.r();
  ref.bnd_f1 = micro.f();
  ref.span_f1 = spans.f();
  std::set<std::string> classes;
  for (const auto& [k, c] : confusion) {
    if (!k.first.empty()) classes.insert(k.first);
    if (!k.second.empty()) classes.insert(k.second);
  }
  double mac = 0, wsum = 0, wtot = 0;
  for (const auto& cl : classes) {
    Prf c;
    for (const auto& [k, v] : confusion) {
      if (k.first == cl && k.second == cl) c.tp += v;
      else if (k.first == cl) c.fn += v;
      else if (k.second == cl) c.fp += v;
    }
    ref.per_segment[cl] = c.f();
    mac += c.f();
    wsum += c.f() * double(c.tp + c.fn);
    wtot += double(c.tp + c.fn);
  }
  ref.macro = classes.empty() ? 1.0 : mac / classes.size();
  ref.weighted = wtot > 0 ? wsum / wtot : (classes.empty() ? 1.0 : 0.0);
  return ref;
}

}  // namespace oracle
