#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "forge/common.hpp"

namespace forge::text {

namespace detail {

inline std::int32_t checked_length(std::string_view s) {
  if (s.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw InputError("text exceeds 2 GiB");
  }
  return static_cast<std::int32_t>(s.size());
}

inline const std::uint8_t* bytes(std::string_view s) {
  return reinterpret_cast<const std::uint8_t*>(s.data());
}

}  // namespace detail

// Calls fn(code_point, byte_offset, byte_length) for each code point.
// Ill-formed sequences are reported with code_point < 0.
template <typename Fn>
void for_each_codepoint(std::string_view s, Fn&& fn) {
  const std::int32_t len = detail::checked_length(s);
  const std::uint8_t* p = detail::bytes(s);
  std::int32_t i = 0;
  while (i < len) {
    const std::int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, len, c);
    fn(c, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
  }
}

inline bool is_valid_utf8(std::string_view s) {
  bool ok = true;
  for_each_codepoint(s, [&](UChar32 c, std::size_t, std::size_t) {
    if (c < 0) ok = false;
  });
  return ok;
}

// Byte offsets of every code point boundary, including 0 and s.size().
inline std::vector<std::size_t> codepoint_boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  out.reserve(s.size() + 1);
  for_each_codepoint(s, [&](UChar32, std::size_t off, std::size_t) {
    out.push_back(off);
  });
  out.push_back(s.size());
  return out;
}

inline std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for_each_codepoint(s, [&](UChar32, std::size_t, std::size_t) { ++n; });
  return n;
}

inline bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

inline bool is_ascii(std::string_view s) {
  for (unsigned char c : s) {
    if (c >= 0x80) return false;
  }
  return true;
}

// Unicode canonical composition (NFC).
inline std::string nfc(std::string_view s) {
  if (is_ascii(s)) return std::string(s);
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), detail::checked_length(s)));
  if (norm->isNormalized(src, status) && U_SUCCESS(status)) return std::string(s);
  status = U_ZERO_ERROR;
  const icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw InputError("NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

// Trims and collapses every run of Unicode whitespace to one ASCII space.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for_each_codepoint(s, [&](UChar32 c, std::size_t off, std::size_t len) {
    if (is_space(c)) {
      pending_space = !out.empty();
      return;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.append(s.substr(off, len));
  });
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t first = s.size();
  std::size_t last = 0;
  for_each_codepoint(s, [&](UChar32 c, std::size_t off, std::size_t len) {
    if (is_space(c)) return;
    if (first == s.size()) first = off;
    last = off + len;
  });
  if (first == s.size()) return {};
  return std::string(s.substr(first, last - first));
}

// NFC + whitespace collapse; case is preserved.
inline std::string normalize_text(std::string_view s) {
  return collapse_whitespace(nfc(s));
}

// Lowercasing under Turkish casing rules (I -> ı, İ -> i).
inline std::string to_lower_tr(std::string_view s) {
  // 'I' lowers to dotless ı, which is not ASCII.
  if (is_ascii(s) && s.find('I') == std::string_view::npos) {
    std::string out(s);
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), detail::checked_length(s)));
  u.toLower(icu::Locale("tr"));
  std::string out;
  u.toUTF8String(out);
  return out;
}

// Splits on runs of Unicode whitespace; no empty pieces.
inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = std::string_view::npos;
  for_each_codepoint(s, [&](UChar32 c, std::size_t off, std::size_t) {
    if (is_space(c)) {
      if (start != std::string_view::npos) out.push_back(s.substr(start, off - start));
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = off;
    }
  });
  if (start != std::string_view::npos) out.push_back(s.substr(start));
  return out;
}

// Removes leading and trailing punctuation code points.
inline std::string_view strip_punctuation(std::string_view s) {
  const auto b = codepoint_boundaries(s);
  std::size_t lo = 0;
  std::size_t hi = b.size() - 1;
  auto punct_at = [&](std::size_t k) {
    UChar32 c;
    std::int32_t i = static_cast<std::int32_t>(b[k]);
    U8_NEXT(detail::bytes(s), i, detail::checked_length(s), c);
    return c >= 0 && u_ispunct(c);
  };
  while (lo < hi && punct_at(lo)) ++lo;
  while (hi > lo && punct_at(hi - 1)) --hi;
  return s.substr(b[lo], b[hi] - b[lo]);
}

}  // namespace forge::text
