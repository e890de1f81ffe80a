#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/corpus.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge::dedup {

struct DedupConfig {
  std::size_t num_perm = 256;
  double threshold = 0.90;
  std::size_t shingle_n = 5;
  std::uint64_t seed = 42;
  // Accept candidates on exact shingle-set Jaccard instead of the signature
  // estimate. Keeps every shingle set in memory.
  bool exact_verify = false;

  void validate() const {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("dedup threshold must be in (0, 1]");
    if (num_perm < 16) throw ConfigError("num_perm must be at least 16");
    if (shingle_n < 1) throw ConfigError("shingle_n must be at least 1");
  }
};

/// Sorted, distinct 64-bit hashes of character n-grams.
struct ShingleSet {
  std::vector<std::uint64_t> hashes;
  std::size_t n = 0;

  std::size_t size() const { return hashes.size(); }
  bool empty() const { return hashes.empty(); }
};

/// Lowercase (Turkish rules), whitespace runs collapsed to single spaces.
inline std::string normalize_for_shingling(std::string_view s) {
  return text::collapse_whitespace(text::to_lower_tr(text::nfc(s)));
}

inline std::uint64_t hash_shingle(std::string_view gram) { return mix64(fnv1a64(gram)); }

inline ShingleSet shingle(std::string_view raw, std::size_t n) {
  if (n < 1) throw ConfigError("shingle width must be at least 1");
  const std::string norm = normalize_for_shingling(raw);
  const auto b = text::codepoint_boundaries(norm);
  ShingleSet s;
  s.n = n;
  const std::size_t cps = b.size() - 1;
  if (cps < n) return s;
  s.hashes.reserve(cps - n + 1);
  for (std::size_t i = 0; i + n <= cps; ++i) {
    s.hashes.push_back(hash_shingle(std::string_view(norm).substr(b[i], b[i + n] - b[i])));
  }
  std::sort(s.hashes.begin(), s.hashes.end());
  s.hashes.erase(std::unique(s.hashes.begin(), s.hashes.end()), s.hashes.end());
  return s;
}

inline double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto i = a.hashes.begin();
  auto j = b.hashes.begin();
  while (i != a.hashes.end() && j != b.hashes.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct MinHashSignature {
  std::vector<std::uint64_t> minima;
  std::size_t num_perm = 0;
  std::uint64_t seed = 0;

  bool operator==(const MinHashSignature&) const = default;
};

// Mersenne prime 2^61 - 1; permutations are x -> (a*x + b) mod p.
inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;
inline constexpr std::uint64_t kEmptyMinimum = std::numeric_limits<std::uint64_t>::max();

inline std::uint64_t mod_mersenne61(unsigned __int128 x) {
  std::uint64_t r = static_cast<std::uint64_t>(x & kMersenne61) +
                    static_cast<std::uint64_t>(x >> 61);
  // x < 2^122 here, so two folds are enough.
  r = (r & kMersenne61) + (r >> 61);
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

/// A seeded family of num_perm universal hash permutations.
class MinHasher {
 public:
  MinHasher(std::size_t num_perm, std::uint64_t seed) : seed_(seed) {
    Rng rng(derive_seed(seed, 0x6d696e68617368ULL));
    coeffs_.reserve(num_perm);
    for (std::size_t i = 0; i < num_perm; ++i) {
      const std::uint64_t a = 1 + rng.below(kMersenne61 - 1);
      const std::uint64_t b = rng.below(kMersenne61);
      coeffs_.emplace_back(a, b);
    }
  }

  MinHashSignature sign(const ShingleSet& s) const {
    MinHashSignature sig{std::vector<std::uint64_t>(coeffs_.size(), kEmptyMinimum),
                         coeffs_.size(), seed_};
    for (std::uint64_t h : s.hashes) {
      const std::uint64_t x = mod_mersenne61(h);
      for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        const auto [a, b] = coeffs_[i];
        const std::uint64_t v =
            mod_mersenne61(static_cast<unsigned __int128>(a) * x + b);
        if (v < sig.minima[i]) sig.minima[i] = v;
      }
    }
    return sig;
  }

  std::size_t num_perm() const { return coeffs_.size(); }

 private:
  std::uint64_t seed_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> coeffs_;
};

inline MinHashSignature minhash_signature(const ShingleSet& s, const DedupConfig& cfg) {
  cfg.validate();
  return MinHasher(cfg.num_perm, cfg.seed).sign(s);
}

inline double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.num_perm != b.num_perm || a.seed != b.seed || a.minima.size() != b.minima.size()) {
    throw std::invalid_argument("incomparable MinHash signatures");
  }
  if (a.minima.empty()) return 1.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.minima.size(); ++i) agree += a.minima[i] == b.minima[i];
  return static_cast<double>(agree) / static_cast<double>(a.minima.size());
}

struct LshParams {
  std::size_t bands = 0;
  std::size_t rows = 0;
  double false_positive = 0.0;
  double false_negative = 0.0;
};

namespace detail {

template <typename Fn>
double integrate(Fn&& f, double lo, double hi) {
  // Composite Simpson rule; the integrands are smooth polynomials.
  constexpr int kSteps = 2000;
  if (hi <= lo) return 0.0;
  const double h = (hi - lo) / kSteps;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < kSteps; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace detail

// Every candidate is verified against the threshold, so a missed pair costs
// more than an extra candidate.
inline constexpr double kLshFalsePositiveWeight = 0.1;
inline constexpr double kLshFalseNegativeWeight = 0.9;

/// Picks bands x rows = num_perm minimizing the weighted integrated
/// false-positive (below threshold) and false-negative (above) collision
/// probability mass.
inline LshParams choose_lsh_params(double threshold, std::size_t num_perm) {
  LshParams best;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t rows = 1; rows <= num_perm; ++rows) {
    if (num_perm % rows) continue;
    const std::size_t bands = num_perm / rows;
    const double r = static_cast<double>(rows);
    const double bd = static_cast<double>(bands);
    auto collide = [&](double s) { return 1.0 - std::pow(1.0 - std::pow(s, r), bd); };
    const double fp = detail::integrate(collide, 0.0, threshold);
    const double fn = detail::integrate([&](double s) { return 1.0 - collide(s); }, threshold, 1.0);
    const double err = kLshFalsePositiveWeight * fp + kLshFalseNegativeWeight * fn;
    if (err < best_err) {
      best_err = err;
      best = {bands, rows, fp, fn};
    }
  }
  return best;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

struct DuplicateCluster {
  std::string retained;
  std::vector<std::string> removed;
};

struct DedupReport {
  std::vector<DuplicateCluster> clusters;
  std::size_t docs_in = 0;
  std::size_t docs_kept = 0;
  std::size_t docs_removed = 0;
  std::size_t candidate_pairs = 0;
  std::size_t verified_pairs = 0;
  std::size_t short_docs = 0;
  DedupConfig config;
  LshParams lsh;

  nlohmann::json to_json() const {
    nlohmann::json cl = nlohmann::json::array();
    for (const auto& c : clusters) cl.push_back({{"retained", c.retained}, {"removed", c.removed}});
    return {
        {"schema_version", kSchemaVersion},
        {"docs_in", docs_in},
        {"docs_kept", docs_kept},
        {"docs_removed", docs_removed},
        {"clusters", cl},
        {"candidate_pairs", candidate_pairs},
        {"verified_pairs", verified_pairs},
        {"short_docs_exact_matched", short_docs},
        {"config",
         {{"num_perm", config.num_perm},
          {"threshold", config.threshold},
          {"shingle_n", config.shingle_n},
          {"seed", config.seed},
          {"exact_verify", config.exact_verify}}},
        {"lsh", {{"bands", lsh.bands}, {"rows", lsh.rows}}},
    };
  }
};

struct DedupResult {
  std::vector<Document> kept;
  DedupReport report;
};

/// Near-duplicate removal: MinHash signatures, LSH banding for candidates,
/// threshold verification, union-find clustering. Each cluster keeps its
/// lexicographically smallest id; kept documents stay in input order.
/// Documents too short to yield a shingle are matched on exact normalized
/// text instead. The result does not depend on the thread count.
inline DedupResult dedup_corpus(std::vector<Document> docs, const DedupConfig& cfg,
                                unsigned threads = 1) {
  cfg.validate();
  const std::size_t n = docs.size();
  const MinHasher hasher(cfg.num_perm, cfg.seed);
  const LshParams lsh = choose_lsh_params(cfg.threshold, cfg.num_perm);

  std::vector<MinHashSignature> sigs(n);
  std::vector<ShingleSet> sets(cfg.exact_verify ? n : 0);
  std::vector<char> short_doc(n, 0);
  std::vector<std::uint64_t> short_key(n, 0);
  parallel_for(n, threads, [&](std::size_t i) {
    ShingleSet s = shingle(docs[i].text, cfg.shingle_n);
    if (s.empty()) {
      short_doc[i] = 1;
      short_key[i] = fnv1a64(normalize_for_shingling(docs[i].text));
      return;
    }
    sigs[i] = hasher.sign(s);
    if (cfg.exact_verify) sets[i] = std::move(s);
  });

  // One bucket table per band, filled in document order.
  std::vector<std::vector<std::vector<std::size_t>>> band_buckets(lsh.bands);
  parallel_for(lsh.bands, threads, [&](std::size_t band) {
    std::unordered_map<std::uint64_t, std::size_t> slot;
    auto& buckets = band_buckets[band];
    for (std::size_t i = 0; i < n; ++i) {
      if (short_doc[i]) continue;
      const auto* first = sigs[i].minima.data() + band * lsh.rows;
      const std::string_view bytes(reinterpret_cast<const char*>(first),
                                   lsh.rows * sizeof(std::uint64_t));
      const std::uint64_t key = mix64(fnv1a64(bytes));
      auto [it, fresh] = slot.try_emplace(key, buckets.size());
      if (fresh) buckets.emplace_back();
      buckets[it->second].push_back(i);
    }
    std::erase_if(buckets, [](const auto& b) { return b.size() < 2; });
  });

  UnionFind uf(n);
  DedupReport report;
  auto accept = [&](std::size_t a, std::size_t b) {
    const double sim = cfg.exact_verify ? exact_jaccard(sets[a], sets[b])
                                        : estimate_jaccard(sigs[a], sigs[b]);
    return sim >= cfg.threshold;
  };
  // Pairs already joined are skipped: connected components of the accepted
  // pair graph do not depend on visiting order.
  for (const auto& buckets : band_buckets) {
    for (const auto& members : buckets) {
      for (std::size_t x = 0; x < members.size(); ++x) {
        for (std::size_t y = x + 1; y < members.size(); ++y) {
          ++report.candidate_pairs;
          if (uf.find(members[x]) == uf.find(members[y])) continue;
          ++report.verified_pairs;
          if (accept(members[x], members[y])) uf.unite(members[x], members[y]);
        }
      }
    }
  }
  {
    std::unordered_map<std::uint64_t, std::size_t> first_short;
    for (std::size_t i = 0; i < n; ++i) {
      if (!short_doc[i]) continue;
      ++report.short_docs;
      auto [it, fresh] = first_short.try_emplace(short_key[i], i);
      if (!fresh &&
          normalize_for_shingling(docs[it->second].text) == normalize_for_shingling(docs[i].text)) {
        uf.unite(it->second, i);
      }
    }
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> by_root;
  for (std::size_t i = 0; i < n; ++i) by_root[uf.find(i)].push_back(i);
  std::vector<char> keep(n, 1);
  for (auto& [root, members] : by_root) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return docs[a].id < docs[b].id; });
    DuplicateCluster c;
    c.retained = docs[members.front()].id;
    for (std::size_t k = 1; k < members.size(); ++k) {
      keep[members[k]] = 0;
      c.removed.push_back(docs[members[k]].id);
    }
    report.clusters.push_back(std::move(c));
  }
  std::sort(report.clusters.begin(), report.clusters.end(),
            [](const auto& a, const auto& b) { return a.retained < b.retained; });

  DedupResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.kept.push_back(std::move(docs[i]));
  }
  report.docs_in = n;
  report.docs_kept = out.kept.size();
  report.docs_removed = n - out.kept.size();
  report.config = cfg;
  report.lsh = lsh;
  out.report = std::move(report);
  return out;
}

}  // namespace forge::dedup
