#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/transfer.hpp"
#include "test_util.hpp"

namespace pipeline {

namespace fs = std::filesystem;

struct Outcome {
  bool ok = true;
  std::string failed_step;
  std::map<std::string, std::string> files;  // output file name -> bytes
};

inline void write_eval_fixtures(const fs::path& dir) {
  std::mt19937_64 rng(17);
  std::string items, preds;
  const std::vector<std::string> terms = {"tereke", "miras", "zilyetlik", "ipotek", "nafaka", "haciz"};
  for (int i = 0; i < 120; ++i) {
    const std::string id = "c" + std::to_string(i);
    const auto& gold = terms[rng() % terms.size()];
    items += nlohmann::json{{"id", id}, {"text", "Dava konusu [MASK] hakkında karar verildi."}, {"answer", gold},
                            {"subdomain", i % 3 ? "miras" : "eşya"}}
                 .dump() +
             "\n";
    nlohmann::json cands = nlohmann::json::array();
    double p = 0.5;
    for (int k = 0; k < 3; ++k) {
      cands.push_back({terms[rng() % terms.size()], p});
      p /= 2;
    }
    preds += nlohmann::json{{"id", id}, {"candidates", cands}}.dump() + "\n";
  }
  testutil::write_file(dir / "items.jsonl", items);
  testutil::write_file(dir / "preds.jsonl", preds);

  const std::vector<std::string> segs = {"header", "formal", "claim", "defense", "reasoning", "ruling", "footer"};
  std::string gold, pred, docs;
  for (int d = 0; d < 12; ++d) {
    std::vector<std::string> tokens, g, p;
    for (const auto& s : segs) {
      const std::size_t len = 5 + rng() % 120;
      const std::size_t shift = rng() % 4 == 0 ? rng() % 3 : 0;
      for (std::size_t k = 0; k < len; ++k) {
        tokens.push_back("w" + std::to_string(rng() % 50));
        g.push_back((k == 0 ? "B-" : "I-") + s);
        p.push_back((k == shift ? "B-" : "I-") + s);
      }
    }
    char id[8];
    std::snprintf(id, sizeof id, "d%02d", d);
    gold += nlohmann::json{{"doc_id", id}, {"tokens", tokens}, {"tags", g}}.dump() + "\n";
    pred += nlohmann::json{{"doc_id", id}, {"tokens", tokens}, {"tags", p}}.dump() + "\n";
    docs += nlohmann::json{{"doc_id", id}, {"tokens", tokens}, {"tags", p}}.dump() + "\n";
  }
  testutil::write_file(dir / "gold.jsonl", gold);
  testutil::write_file(dir / "pred.jsonl", pred);
  testutil::write_file(dir / "docs.jsonl", docs);
}

inline void write_old_embeddings(const fs::path& vocab, const fs::path& out) {
  const auto v = forge::tok::Vocabulary::load(vocab);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> vals(v.size() * 16);
  for (auto& x : vals) x = u(rng);
  forge::transfer::write_emb1(out, forge::transfer::EmbeddingMatrix(static_cast<std::uint32_t>(v.size()), 16, vals));
}

/// Runs every CLI stage over the bundled corpus into `dir` and collects the
/// bytes of every file it writes.
inline Outcome run_all(const fs::path& dir, const std::string& threads_flag, const std::string& env = "") {
  Outcome o;
  fs::create_directories(dir);
  write_eval_fixtures(dir);
  const std::string d = dir.string() + "/";
  const std::string pre = threads_flag + " ";
  auto step = [&](const std::string& name, const std::string& args) {
    if (!o.ok) return;
    const auto r = testutil::run_cli(pre + args, env);
    if (r.status != 0) {
      o.ok = false;
      o.failed_step = name + " (exit " + std::to_string(r.status) + ")";
    }
    if (!r.out.empty()) o.files[name + ".stdout"] = r.out;
  };
  const std::string corpus = testutil::data_path("corpus.jsonl");
  step("stats", "stats --input " + corpus + " --report " + d + "stats.json");
  step("dedup", "dedup --input " + corpus + " --output " + d + "dedup.jsonl --report " + d + "dedup.json");
  step("balance", "balance --input " + d + "dedup.jsonl --targets " + testutil::data_path("targets.json") +
                      " --output " + d + "balanced.jsonl --report " + d + "balance.json");
  step("train-tokenizer", "train-tokenizer --input " + d + "balanced.jsonl --seed-terms " +
                              testutil::data_path("seed_terms.txt") + " --vocab-size 3000 --out " + d +
                              "vocab.txt --report " + d + "tokenizer.json");
  step("train-old", "train-tokenizer --input " + d + "dedup.jsonl --vocab-size 1200 --out " + d +
                        "old_vocab.txt");
  if (o.ok) write_old_embeddings(dir / "old_vocab.txt", dir / "old.emb");
  step("tokenize-stats",
       "tokenize-stats --vocab " + d + "vocab.txt --input " + d + "balanced.jsonl --report " + d + "frag.json");
  step("vocab-transfer", "vocab-transfer --old-vocab " + d + "old_vocab.txt --new-vocab " + d +
                             "vocab.txt --old-emb " + d + "old.emb --out " + d + "new.emb --report " + d +
                             "transfer.json");
  step("mask", "mask --input " + d + "balanced.jsonl --vocab " + d + "vocab.txt --keywords " +
                   testutil::data_path("keywords.txt") + " --max-len 128 --out " + d + "masked.jsonl --report " +
                   d + "mask.json");
  step("eval-cloze", "eval-cloze --items " + d + "items.jsonl --preds " + d + "preds.jsonl --resamples 2000 --report " +
                         d + "cloze.json");
  step("eval-seg", "eval-seg --gold " + d + "gold.jsonl --pred " + d + "pred.jsonl --report " + d + "seg.json");
  step("window", "window --input " + d + "docs.jsonl --size 128 --stride 64 --out " + d + "windows.jsonl");
  step("window-merge", "window --merge --input " + d + "windows.jsonl --out " + d + "merged.jsonl");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) o.files[e.path().filename().string()] = testutil::read_file(e.path());
  }
  return o;
}

/// Names of files whose bytes differ or exist in only one outcome.
inline std::vector<std::string> differences(const Outcome& a, const Outcome& b) {
  std::vector<std::string> out;
  for (const auto& [k, v] : a.files) {
    auto it = b.files.find(k);
    if (it == b.files.end() || it->second != v) out.push_back(k);
  }
  for (const auto& [k, v] : b.files) {
    if (!a.files.count(k)) out.push_back(k);
  }
  return out;
}

}  // namespace pipeline
