#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/tokenizer.hpp"

namespace forge::transfer {

using tok::TokenId;
using tok::Vocabulary;

struct OverlapReport {
  std::size_t old_size = 0;
  std::size_t new_size = 0;
  std::size_t shared_count = 0;
  std::vector<std::pair<TokenId, TokenId>> shared;  // (new_id, old_id)
  std::vector<TokenId> new_only;

  double overlap_fraction() const {
    return new_size ? static_cast<double>(shared_count) / static_cast<double>(new_size) : 0.0;
  }
};

/// "76.7%" style rendering of a fraction.
inline std::string format_percent(double fraction, int decimals = 1) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", decimals, fraction * 100.0);
  return buf;
}

inline nlohmann::json to_json(const OverlapReport& r) {
  return {{"schema_version", kSchemaVersion},
          {"old_size", r.old_size},
          {"new_size", r.new_size},
          {"shared_count", r.shared_count},
          {"new_only_count", r.new_only.size()},
          {"overlap_fraction", r.overlap_fraction()},
          {"overlap_percent", format_percent(r.overlap_fraction())},
          {"denominator", "new vocabulary size"}};
}

/// Exact surface-string matching of every new token against the old vocabulary.
inline OverlapReport overlap_analysis(const Vocabulary& old_vocab, const Vocabulary& new_vocab) {
  OverlapReport r;
  r.old_size = old_vocab.size();
  r.new_size = new_vocab.size();
  for (std::size_t i = 0; i < new_vocab.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (auto old_id = old_vocab.find(new_vocab.token(id))) {
      r.shared.emplace_back(id, *old_id);
    } else {
      r.new_only.push_back(id);
    }
  }
  r.shared_count = r.shared.size();
  return r;
}

/// Row-major float32 matrix.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::uint32_t rows, std::uint32_t dims)
      : rows_(rows), dims_(dims), values_(static_cast<std::size_t>(rows) * dims, 0.0f) {}
  EmbeddingMatrix(std::uint32_t rows, std::uint32_t dims, std::vector<float> values)
      : rows_(rows), dims_(dims), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(rows) * dims) {
      throw InputError("embedding value count does not equal rows x dims");
    }
  }

  std::uint32_t rows() const { return rows_; }
  std::uint32_t dims() const { return dims_; }
  std::span<const float> values() const { return values_; }

  std::span<float> row(std::size_t r) { return {values_.data() + r * dims_, dims_}; }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * dims_, dims_}; }

  bool all_finite() const {
    for (float v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t dims_ = 0;
  std::vector<float> values_;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw InputError("truncated EMB1 file");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

}  // namespace detail

inline constexpr std::array<char, 4> kEmb1Magic = {'E', 'M', 'B', '1'};

/// EMB1: "EMB1", rows u32 LE, dims u32 LE, rows*dims f32 LE row-major.
inline void write_emb1(std::ostream& out, const EmbeddingMatrix& m) {
  out.write(kEmb1Magic.data(), 4);
  detail::put_u32(out, m.rows());
  detail::put_u32(out, m.dims());
  for (float v : m.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline EmbeddingMatrix read_emb1(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kEmb1Magic) throw InputError("not an EMB1 file");
  const std::uint32_t rows = detail::get_u32(in);
  const std::uint32_t dims = detail::get_u32(in);
  std::vector<float> values(static_cast<std::size_t>(rows) * dims);
  for (auto& v : values) v = std::bit_cast<float>(detail::get_u32(in));
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("trailing bytes after EMB1 payload");
  return EmbeddingMatrix(rows, dims, std::move(values));
}

inline void write_emb1(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_emb1(out, m);
}

inline EmbeddingMatrix read_emb1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read_emb1(in);
}

// TSV: one row per line, tab-separated values printed with round-trip precision.
inline void write_tsv(std::ostream& out, const EmbeddingMatrix& m) {
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(row[c]));
      if (c) out << '\t';
      out << buf;
    }
    out << '\n';
  }
}

inline EmbeddingMatrix read_tsv(std::istream& in) {
  std::vector<float> values;
  std::uint32_t rows = 0;
  std::size_t dims = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t n = 0;
    std::string cell;
    while (std::getline(ls, cell, '\t')) {
      try {
        values.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw InputError("bad TSV value '" + cell + "' on row " + std::to_string(rows));
      }
      ++n;
    }
    if (rows == 0) dims = n;
    if (n != dims) throw InputError("ragged TSV row " + std::to_string(rows));
    ++rows;
  }
  return EmbeddingMatrix(rows, static_cast<std::uint32_t>(dims), std::move(values));
}

/// Column-wise mean over all rows except those listed in excluded_rows.
inline std::vector<float> column_mean(const EmbeddingMatrix& m,
                                      std::span<const TokenId> excluded_rows = {}) {
  std::vector<char> skip(m.rows(), 0);
  for (TokenId r : excluded_rows) {
    if (r >= 0 && static_cast<std::size_t>(r) < m.rows()) skip[r] = 1;
  }
  std::vector<double> acc(m.dims(), 0.0);
  std::size_t used = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (skip[r]) continue;
    ++used;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) acc[c] += row[c];
  }
  if (used == 0) throw InputError("no rows left to average");
  std::vector<float> mean(m.dims());
  for (std::size_t c = 0; c < acc.size(); ++c) mean[c] = static_cast<float>(acc[c] / used);
  return mean;
}

/// New embedding matrix: shared tokens copy their old row, new tokens get
/// the old matrix's column mean.
inline EmbeddingMatrix apply_transfer(const OverlapReport& report, const EmbeddingMatrix& old_matrix,
                                      std::span<const TokenId> mean_excluded_rows = {}) {
  if (old_matrix.rows() != report.old_size) {
    throw InputError("old matrix has " + std::to_string(old_matrix.rows()) +
                     " rows but the old vocabulary has " + std::to_string(report.old_size));
  }
  if (report.shared.size() + report.new_only.size() != report.new_size) {
    throw InputError("overlap report is inconsistent");
  }
  if (!old_matrix.all_finite()) throw InputError("old matrix contains non-finite values");
  EmbeddingMatrix out(static_cast<std::uint32_t>(report.new_size), old_matrix.dims());
  for (const auto& [new_id, old_id] : report.shared) {
    const auto src = old_matrix.row(old_id);
    std::copy(src.begin(), src.end(), out.row(new_id).begin());
  }
  if (!report.new_only.empty()) {
    const auto mean = column_mean(old_matrix, mean_excluded_rows);
    for (TokenId id : report.new_only) std::copy(mean.begin(), mean.end(), out.row(id).begin());
  }
  return out;
}

/// Ids of bracketed special tokens ("[CLS]", "[unused3]", ...) in a vocabulary.
inline std::vector<TokenId> bracketed_special_ids(const Vocabulary& v) {
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& t = v.token(static_cast<TokenId>(i));
    if (t.size() > 2 && t.front() == '[' && t.back() == ']') ids.push_back(static_cast<TokenId>(i));
  }
  return ids;
}

}  // namespace forge::transfer
