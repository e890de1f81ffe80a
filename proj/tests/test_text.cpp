#include <gtest/gtest.h>

#include "forge/text.hpp"

namespace t = forge::text;

namespace {

TEST(Text, NfcComposesDecomposedTurkish) {
  // "ş" as s + combining cedilla, "ı" has no decomposition.
  EXPECT_EQ(t::nfc("s\xCC\xA7"), "\xC5\x9F");
  EXPECT_EQ(t::nfc("ascii only"), "ascii only");
}

TEST(Text, CollapseWhitespaceTrimsAndJoins) {
  EXPECT_EQ(t::collapse_whitespace("  a \t\n b   c  "), "a b c");
  EXPECT_EQ(t::collapse_whitespace("   "), "");
  // U+00A0 no-break space counts as whitespace.
  EXPECT_EQ(t::collapse_whitespace("a\xC2\xA0" "b"), "a b");
}

TEST(Text, TurkishLowercase) {
  EXPECT_EQ(t::to_lower_tr("İSTANBUL"), "istanbul");
  EXPECT_EQ(t::to_lower_tr("IRMAK"), "\xC4\xB1rmak");  // dotless ı
  EXPECT_EQ(t::to_lower_tr("karar"), "karar");
  EXPECT_EQ(t::to_lower_tr("ÇĞÖŞÜ"), "çğöşü");
}

TEST(Text, CodepointCounting) {
  EXPECT_EQ(t::codepoint_count("İçtihadı"), 8u);
  EXPECT_EQ(t::codepoint_count(""), 0u);
  const auto b = t::codepoint_boundaries("aç");
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0], 0u);
  EXPECT_EQ(b[1], 1u);
  EXPECT_EQ(b[2], 3u);
}

TEST(Text, Utf8Validation) {
  EXPECT_TRUE(t::is_valid_utf8("hüküm"));
  EXPECT_FALSE(t::is_valid_utf8("\xC3"));
  EXPECT_FALSE(t::is_valid_utf8("\xFF\xFE"));
  EXPECT_FALSE(t::is_valid_utf8("\xED\xA0\x80"));  // surrogate
}

TEST(Text, SplitWhitespace) {
  const auto w = t::split_whitespace(" Yargıtay  Hukuk\tDairesi ");
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0], "Yargıtay");
  EXPECT_EQ(w[2], "Dairesi");
  EXPECT_TRUE(t::split_whitespace("").empty());
}

TEST(Text, StripPunctuation) {
  EXPECT_EQ(t::strip_punctuation("(tereke),"), "tereke");
  EXPECT_EQ(t::strip_punctuation("\"karar.\""), "karar");
  EXPECT_EQ(t::strip_punctuation("..."), "");
  EXPECT_EQ(t::strip_punctuation("a.b"), "a.b");
}

}  // namespace
