#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "forge/transfer.hpp"
#include "test_util.hpp"

namespace tr = forge::transfer;
namespace tk = forge::tok;
using testutil::TempDir;

namespace {

tk::Vocabulary plain_vocab(std::vector<std::string> t) { return tk::Vocabulary::from_tokens(std::move(t), false); }

tr::EmbeddingMatrix random_matrix(std::uint32_t rows, std::uint32_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> v(static_cast<std::size_t>(rows) * dims);
  for (auto& x : v) x = nd(rng);
  return tr::EmbeddingMatrix(rows, dims, std::move(v));
}

TEST(Overlap, PercentFormatting) {
  EXPECT_EQ(tr::format_percent(36837.0 / 48009.0), "76.7%");
  EXPECT_EQ(tr::format_percent(0.0), "0.0%");
  EXPECT_EQ(tr::format_percent(1.0), "100.0%");
  EXPECT_EQ(tr::format_percent(0.84399, 2), "84.40%");
}

TEST(Overlap, LargeSyntheticVocabularies) {
  std::vector<std::string> old_t, new_t;
  for (int i = 0; i < 36837; ++i) {
    old_t.push_back("s" + std::to_string(i));
    new_t.push_back("s" + std::to_string(i));
  }
  for (int i = 0; i < 48009 - 36837; ++i) new_t.push_back("n" + std::to_string(i));
  for (int i = 0; i < 5000; ++i) old_t.push_back("o" + std::to_string(i));
  const auto r = tr::overlap_analysis(plain_vocab(old_t), plain_vocab(new_t));
  EXPECT_EQ(r.shared_count, 36837u);
  EXPECT_EQ(r.new_size, 48009u);
  EXPECT_EQ(r.new_only.size(), 48009u - 36837u);
  EXPECT_EQ(tr::to_json(r).at("overlap_percent"), "76.7%");
}

TEST(Overlap, ExactSurfaceMatching) {
  const auto old_v = plain_vocab({"karar", "##lar", "Karar", "a"});
  const auto new_v = plain_vocab({"lar", "karar", "##lar", "KARAR"});
  const auto r = tr::overlap_analysis(old_v, new_v);
  ASSERT_EQ(r.shared.size(), 2u);
  EXPECT_EQ(r.shared[0], (std::pair<tk::TokenId, tk::TokenId>{1, 0}));
  EXPECT_EQ(r.shared[1], (std::pair<tk::TokenId, tk::TokenId>{2, 1}));
  EXPECT_EQ(r.new_only, (std::vector<tk::TokenId>{0, 3}));
}

TEST(Transfer, SharedRowsCopiedNewRowsGetColumnMean) {
  std::vector<std::string> old_t, new_t;
  for (int i = 0; i < 10; ++i) old_t.push_back("t" + std::to_string(i));
  for (int i = 0; i < 10; i += 2) new_t.push_back("t" + std::to_string(i));
  for (int i = 0; i < 4; ++i) new_t.push_back("new" + std::to_string(i));
  const auto old_m = random_matrix(10, 8, 3);
  const auto r = tr::overlap_analysis(plain_vocab(old_t), plain_vocab(new_t));
  const auto m = tr::apply_transfer(r, old_m);
  ASSERT_EQ(m.rows(), 9u);
  ASSERT_EQ(m.dims(), 8u);
  for (int k = 0; k < 5; ++k) {
    const auto a = m.row(k);
    const auto b = old_m.row(2 * k);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  for (std::size_t c = 0; c < 8; ++c) {
    double sum = 0;
    for (std::size_t r2 = 0; r2 < 10; ++r2) sum += old_m.row(r2)[c];
    for (std::size_t k = 5; k < 9; ++k) EXPECT_NEAR(m.row(k)[c], sum / 10.0, 1e-6);
  }
}

TEST(Transfer, MeanCanSkipSpecialRows) {
  const auto old_v = plain_vocab({"[CLS]", "a", "b", "[unused0]"});
  const std::vector<float> vals = {100, 100, 1, 2, 3, 4, -50, -50};
  const tr::EmbeddingMatrix old_m(4, 2, vals);
  const auto r = tr::overlap_analysis(old_v, plain_vocab({"a", "z"}));
  const auto skip = tr::bracketed_special_ids(old_v);
  EXPECT_EQ(skip, (std::vector<tk::TokenId>{0, 3}));
  const auto m = tr::apply_transfer(r, old_m, skip);
  EXPECT_FLOAT_EQ(m.row(1)[0], 2.0f);
  EXPECT_FLOAT_EQ(m.row(1)[1], 3.0f);
  const auto all = tr::apply_transfer(r, old_m);
  EXPECT_FLOAT_EQ(all.row(1)[0], (100 + 1 + 3 - 50) / 4.0f);
}

TEST(Transfer, Errors) {
  const auto r = tr::overlap_analysis(plain_vocab({"a", "b"}), plain_vocab({"a", "c"}));
  EXPECT_THROW(tr::apply_transfer(r, random_matrix(3, 2, 1)), forge::InputError);
  tr::EmbeddingMatrix bad(2, 1, {1.0f, std::nanf("")});
  EXPECT_THROW(tr::apply_transfer(r, bad), forge::InputError);
  EXPECT_THROW(tr::EmbeddingMatrix(2, 2, {1.0f}), forge::InputError);
}

TEST(Emb1, RoundTripIsBitExact) {
  TempDir dir;
  auto m = random_matrix(7, 5, 11);
  tr::write_emb1(dir / "m.emb", m);
  EXPECT_EQ(tr::read_emb1(dir / "m.emb"), m);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.emb"), 12u + 7 * 5 * 4);
}

TEST(Emb1, LittleEndianLayout) {
  std::ostringstream out;
  tr::write_emb1(out, tr::EmbeddingMatrix(1, 1, {1.0f}));
  const std::string s = out.str();
  EXPECT_EQ(s, std::string("EMB1\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x80\x3f", 16));
}

TEST(Emb1, RejectsCorruptFiles) {
  std::istringstream bad_magic("EMB2\x01\x00\x00\x00");
  EXPECT_THROW(tr::read_emb1(bad_magic), forge::InputError);
  std::istringstream truncated(std::string("EMB1\x02\x00\x00\x00\x01\x00\x00\x00\x00\x00", 14));
  EXPECT_THROW(tr::read_emb1(truncated), forge::InputError);
  std::istringstream trailing(std::string("EMB1\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x80\x3f!", 17));
  EXPECT_THROW(tr::read_emb1(trailing), forge::InputError);
  EXPECT_THROW(tr::read_emb1(std::filesystem::path("/nonexistent/x.emb")), forge::InputError);
}

TEST(Tsv, RoundTripPreservesFloats) {
  auto m = random_matrix(6, 4, 99);
  std::stringstream ss;
  tr::write_tsv(ss, m);
  EXPECT_EQ(tr::read_tsv(ss), m);
}

TEST(Tsv, RejectsRaggedAndBadValues) {
  std::istringstream ragged("1\t2\n3\n");
  EXPECT_THROW(tr::read_tsv(ragged), forge::InputError);
  std::istringstream bad("1\tx\n");
  EXPECT_THROW(tr::read_tsv(bad), forge::InputError);
}

}  // namespace
