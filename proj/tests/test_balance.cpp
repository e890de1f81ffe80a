#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "forge/balance.hpp"

namespace b = forge::balance;
using forge::Document;

namespace {

forge::CorpusStats stats_with(const std::string& key, std::uint64_t bytes, std::uint64_t docs = 1) {
  forge::CorpusStats s;
  s.groups[key] = {docs, bytes};
  s.total = {docs, bytes};
  return s;
}

std::vector<Document> uniform_group(std::size_t n, std::size_t bytes_each, const std::string& content = "Yargıtay") {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back({"y" + std::to_string(i), "İÇTİHAT", content, std::nullopt, std::string(bytes_each, 'k')});
  }
  return docs;
}

TEST(BalancePlan, PaperDownscaleRatio) {
  // 14.48 GB down to 3.51 GB.
  const auto plan = b::plan_balance(stats_with("İÇTİHAT/Yargıtay", 14'480'000'000ULL), {{"İÇTİHAT/Yargıtay", 3.51e9}}, 42);
  const auto& p = plan.for_group("İÇTİHAT/Yargıtay");
  EXPECT_EQ(p.action, b::Action::downsample);
  EXPECT_NEAR(p.ratio, 0.2424, 0.0001);
}

TEST(BalancePlan, EqualTargetsGiveIdentityPlan) {
  forge::CorpusStats s;
  s.groups["A/x"] = {3, 300};
  s.groups["B/y/z"] = {2, 50};
  const auto plan = b::plan_balance(s, {{"A/x", 300}, {"B/y/z", 50}}, 1);
  for (const auto& [k, p] : plan.groups) {
    EXPECT_EQ(p.action, b::Action::keep) << k;
    EXPECT_DOUBLE_EQ(p.ratio, 1.0);
  }
  EXPECT_EQ(plan.for_group("not/targeted").action, b::Action::keep);
}

TEST(BalancePlan, OversampleMultiplier) {
  const auto plan = b::plan_balance(stats_with("HUKUK/TEZ", 100'000), {{"HUKUK/TEZ", 250'000}}, 1);
  EXPECT_EQ(plan.for_group("HUKUK/TEZ").action, b::Action::oversample);
  EXPECT_DOUBLE_EQ(plan.for_group("HUKUK/TEZ").ratio, 2.5);
}

TEST(BalancePlan, Errors) {
  const auto s = stats_with("A/x", 100);
  EXPECT_THROW(b::plan_balance(s, {{"B/y", 10}}, 1), forge::ConfigError);
  EXPECT_THROW(b::plan_balance(s, {{"A/x", 0}}, 1), forge::ConfigError);
  EXPECT_THROW(b::plan_balance(s, {{"A/x", -5}}, 1), forge::ConfigError);
  const auto zero = stats_with("Z/z", 0);
  EXPECT_THROW(b::plan_balance(zero, {{"Z/z", 10}}, 1), forge::ConfigError);
  EXPECT_THROW(b::parse_targets(nlohmann::json::array()), forge::ConfigError);
  EXPECT_THROW(b::parse_targets(nlohmann::json{{"A/x", "lots"}}), forge::ConfigError);
}

TEST(BalanceApply, IntegerMultiplierCopiesWithSuffixes) {
  const auto docs = uniform_group(4, 10);
  const auto plan = b::plan_balance(forge::corpus_stats(docs), {{"İÇTİHAT/Yargıtay", 120}}, 5);
  const auto out = b::apply_balance(docs, plan);
  ASSERT_EQ(out.size(), 12u);
  EXPECT_EQ(out[0].id, "y0#0");
  EXPECT_EQ(out[1].id, "y0#1");
  EXPECT_EQ(out[2].id, "y0#2");
  EXPECT_EQ(out[11].id, "y3#2");
  EXPECT_EQ(out[2].text, docs[0].text);
}

TEST(BalanceApply, DownsampleConvergesToTarget) {
  constexpr std::size_t n = 10000;
  const auto docs = uniform_group(n, 100);
  const double keep = 3.51 / 14.48;
  const auto plan = b::plan_balance(forge::corpus_stats(docs), {{"İÇTİHAT/Yargıtay", keep * n * 100}}, 42);
  const auto out = b::apply_balance(docs, plan);
  const double sigma = std::sqrt(n * keep * (1 - keep));
  EXPECT_LE(std::abs(static_cast<double>(out.size()) - n * keep), 3 * sigma);
}

TEST(BalanceApply, FractionalOversampleConvergesToTarget) {
  constexpr std::size_t n = 10000;
  const auto docs = uniform_group(n, 50);
  const auto plan = b::plan_balance(forge::corpus_stats(docs), {{"İÇTİHAT/Yargıtay", 2.5 * n * 50}}, 42);
  const auto out = b::apply_balance(docs, plan);
  const double sigma = std::sqrt(n * 0.5 * 0.5);
  EXPECT_LE(std::abs(static_cast<double>(out.size()) - 2.5 * n), 3 * sigma);
  std::set<std::string> ids;
  for (const auto& d : out) ids.insert(d.id);
  EXPECT_EQ(ids.size(), out.size());
}

TEST(BalanceApply, DecisionsIgnoreCorpusOrder) {
  auto docs = uniform_group(500, 20);
  const auto plan = b::plan_balance(forge::corpus_stats(docs), {{"İÇTİHAT/Yargıtay", 5000}}, 9);
  auto ids_of = [](std::vector<Document> v) {
    std::vector<std::string> ids;
    for (auto& d : v) ids.push_back(d.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto first = ids_of(b::apply_balance(docs, plan));
  std::mt19937_64 rng(3);
  std::shuffle(docs.begin(), docs.end(), rng);
  EXPECT_EQ(ids_of(b::apply_balance(docs, plan)), first);
  // Same plan, same input: identical output.
  EXPECT_EQ(b::apply_balance(docs, plan), b::apply_balance(docs, plan));
}

TEST(BalanceApply, UntargetedGroupsPassThrough) {
  auto docs = uniform_group(10, 5);
  auto other = uniform_group(3, 5, "Danıştay");
  for (auto& d : other) d.id = "o" + d.id;
  docs.insert(docs.end(), other.begin(), other.end());
  const auto plan = b::plan_balance(forge::corpus_stats(docs), {{"İÇTİHAT/Yargıtay", 25}}, 1);
  const auto out = b::apply_balance(docs, plan);
  EXPECT_EQ(std::count_if(out.begin(), out.end(), [](const Document& d) { return d.content == "Danıştay"; }), 3);
}

TEST(BalancePlan, JsonReportsActions) {
  forge::CorpusStats s;
  s.groups["A/x"] = {1, 100};
  s.groups["B/y"] = {1, 100};
  const auto j = b::plan_balance(s, {{"A/x", 50}, {"B/y", 300}}, 4).to_json();
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("groups").at("A/x").at("action"), "downsample");
  EXPECT_DOUBLE_EQ(j.at("groups").at("A/x").at("keep_ratio").get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j.at("groups").at("B/y").at("multiplier").get<double>(), 3.0);
}

}  // namespace
