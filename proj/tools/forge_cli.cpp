// forge: command-line front end for the corpus pipeline and evaluators.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "forge/config.hpp"
#include "forge/forge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

struct Global {
  std::string config_path;
  unsigned threads = 0;
  CLI::Option* threads_opt = nullptr;
  std::string log_level = "info";
};

// Flag value wins only if the flag was given on the command line.
template <typename T, typename U>
void override_with(const CLI::Option* opt, const T& flag_value, U& dst) {
  if (opt && opt->count() > 0) dst = flag_value;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw forge::InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void emit_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(path, j);
  }
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw forge::InputError("cannot write " + path.string());
  return out;
}

bool has_tsv_extension(const fs::path& p) { return p.extension() == ".tsv"; }

// Options are added with their defaults so that --help lists them.
template <typename T>
CLI::Option* add_opt(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
  return app->add_option(name, var, desc)->capture_default_str();
}

struct StatsCmd {
  std::string input;
  std::string report;
  bool lenient = false;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    add_opt(app, "--report", report, "Output path for the stats JSON ('-' or empty: stdout)");
    app->add_flag("--lenient", lenient, "Skip malformed records instead of failing")->capture_default_str();
  }

  int run(const forge::PipelineConfig&, unsigned) const {
    std::size_t skipped = 0;
    forge::CorpusReader reader(input, lenient ? forge::ReadMode::lenient : forge::ReadMode::strict);
    forge::CorpusStats stats;
    while (auto d = reader.next()) stats.add(*d);
    skipped = reader.skipped();
    if (skipped) spdlog::warn("skipped {} malformed records", skipped);
    json j = stats.to_json();
    j["skipped_records"] = skipped;
    emit_json(report, j);
    spdlog::info("{} documents in {} groups", stats.total.doc_count, stats.groups.size());
    return kExitOk;
  }
};

struct DedupCmd {
  std::string input;
  std::string output;
  std::string report;
  forge::dedup::DedupConfig d;
  CLI::Option* num_perm = nullptr;
  CLI::Option* threshold = nullptr;
  CLI::Option* shingle_n = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* exact = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    app->add_option("--output", output, "Output JSONL of kept documents")->required();
    app->add_option("--report", report, "Output path for the dedup report JSON")->required();
    num_perm = add_opt(app, "--num-perm", d.num_perm, "MinHash permutations");
    threshold = add_opt(app, "--threshold", d.threshold, "Similarity threshold for a duplicate");
    shingle_n = add_opt(app, "--shingle-n", d.shingle_n, "Character shingle width");
    seed = add_opt(app, "--seed", d.seed, "Permutation seed");
    exact = app->add_flag("--exact-verify", d.exact_verify, "Verify candidates with exact Jaccard")
                ->capture_default_str();
  }

  int run(const forge::PipelineConfig& cfg, unsigned threads) const {
    auto dc = cfg.dedup;
    override_with(num_perm, d.num_perm, dc.num_perm);
    override_with(threshold, d.threshold, dc.threshold);
    override_with(shingle_n, d.shingle_n, dc.shingle_n);
    override_with(seed, d.seed, dc.seed);
    override_with(exact, d.exact_verify, dc.exact_verify);
    dc.validate();
    auto result = forge::dedup::dedup_corpus(forge::read_corpus(input), dc, threads);
    forge::write_corpus(output, result.kept);
    write_json(report, result.report.to_json());
    spdlog::info("dedup: {} in, {} kept, {} removed in {} clusters (bands={}, rows={})", result.report.docs_in,
                 result.report.docs_kept, result.report.docs_removed, result.report.clusters.size(),
                 result.report.lsh.bands, result.report.lsh.rows);
    return kExitOk;
  }
};

struct BalanceCmd {
  std::string input;
  std::string targets;
  std::string output;
  std::string report;
  std::uint64_t seed_value = 42;
  CLI::Option* seed = nullptr;
  CLI::Option* targets_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    targets_opt = app->add_option("--targets", targets, "JSON map of group key to target bytes")
                      ->check(CLI::ExistingFile);
    app->add_option("--output", output, "Output JSONL of the balanced corpus")->required();
    add_opt(app, "--report", report, "Optional path for the plan JSON");
    seed = add_opt(app, "--seed", seed_value, "Sampling seed");
  }

  int run(const forge::PipelineConfig& cfg, unsigned) const {
    std::uint64_t s = cfg.balance_seed;
    override_with(seed, seed_value, s);
    forge::balance::Targets t;
    if (targets_opt->count()) {
      std::ifstream in(targets, std::ios::binary);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw forge::ConfigError("targets file is not valid JSON: " + std::string(e.what()));
      }
      t = forge::balance::parse_targets(j);
    } else if (cfg.balance_targets) {
      t = *cfg.balance_targets;
    } else {
      throw forge::ConfigError("balance needs --targets or a balance.targets config section");
    }
    // Two passes over the file: sizes first, then the streamed decisions.
    forge::CorpusStats stats;
    {
      forge::CorpusReader r(input);
      while (auto d = r.next()) stats.add(*d);
    }
    const auto plan = forge::balance::plan_balance(stats, t, s);
    forge::CorpusWriter w(output);
    forge::CorpusStats out_stats;
    forge::CorpusReader r(input);
    while (auto d = r.next()) {
      forge::balance::apply_balance_one(*d, plan, [&](const forge::Document& x) {
        w.write(x);
        out_stats.add(x);
      });
    }
    json j = plan.to_json();
    j["schema_version"] = forge::kSchemaVersion;
    j["output_stats"] = out_stats.to_json();
    if (!report.empty()) write_json(report, j);
    spdlog::info("balance: {} docs in, {} docs out (seed {})", stats.total.doc_count, out_stats.total.doc_count, s);
    return kExitOk;
  }
};

struct TrainTokenizerCmd {
  std::string input;
  std::string seed_terms;
  std::string out;
  std::string report;
  forge::tok::TokenizerConfig t;
  CLI::Option* vocab_size = nullptr;
  CLI::Option* min_freq = nullptr;
  CLI::Option* max_chars = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    app->add_option("--seed-terms", seed_terms, "Dictionary of terms kept as whole tokens, one per line")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output vocab.txt")->required();
    add_opt(app, "--report", report, "Optional path for the training summary JSON");
    vocab_size = add_opt(app, "--vocab-size", t.vocab_size, "Target vocabulary size including specials");
    min_freq = add_opt(app, "--min-frequency", t.min_frequency, "Minimum count for alphabet characters");
    max_chars = add_opt(app, "--max-word-chars", t.max_word_chars, "Longer words encode as [UNK]");
  }

  int run(const forge::PipelineConfig& cfg, unsigned threads) const {
    auto tc = cfg.tokenizer;
    override_with(vocab_size, t.vocab_size, tc.vocab_size);
    override_with(min_freq, t.min_frequency, tc.min_frequency);
    override_with(max_chars, t.max_word_chars, tc.max_word_chars);
    std::size_t skipped_terms = 0;
    if (!seed_terms.empty()) {
      auto f = forge::tok::load_seed_terms(seed_terms);
      tc.seed_terms = std::move(f.terms);
      skipped_terms = f.skipped_multiword;
      if (skipped_terms) spdlog::warn("skipped {} multi-word seed lines", skipped_terms);
    }
    tc.validate();
    const auto counts = forge::tok::count_corpus_words(forge::read_corpus(input), threads);
    auto result = forge::tok::train_wordpiece(counts, tc);
    if (!result.filled()) {
      spdlog::warn("corpus supports only {} of {} requested tokens", result.vocab.size(), tc.vocab_size);
    }
    result.vocab.save(out);
    if (!report.empty()) {
      json j = result.to_json();
      j["min_frequency"] = tc.min_frequency;
      j["skipped_seed_lines"] = skipped_terms;
      j["distinct_words"] = counts.size();
      write_json(report, j);
    }
    spdlog::info("vocabulary of {} tokens written to {}", result.vocab.size(), out);
    return kExitOk;
  }
};

struct TokenizeStatsCmd {
  std::string vocab;
  std::string input;
  std::string report;
  std::size_t max_word_chars = 100;
  CLI::Option* max_chars = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--vocab", vocab, "vocab.txt")->required()->check(CLI::ExistingFile);
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    add_opt(app, "--report", report, "Output path for the fragmentation JSON ('-' or empty: stdout)");
    max_chars = add_opt(app, "--max-word-chars", max_word_chars, "Longer words encode as [UNK]");
  }

  int run(const forge::PipelineConfig& cfg, unsigned threads) const {
    std::size_t mwc = cfg.tokenizer.max_word_chars;
    override_with(max_chars, max_word_chars, mwc);
    const auto v = forge::tok::Vocabulary::load(vocab, false);
    const forge::tok::WordPieceEncoder enc(v, mwc);
    const auto docs = forge::read_corpus(input);
    std::vector<forge::tok::FragmentationReport> parts(docs.size());
    forge::parallel_for(docs.size(), threads,
                        [&](std::size_t i) { forge::tok::add_lines(enc, docs[i].text, parts[i]); });
    forge::tok::FragmentationReport r;
    for (const auto& p : parts) r.merge(p);
    if (r.total_lines == 0) throw forge::InputError("corpus has no non-blank lines");
    json j = r.to_json();
    j["vocab_size"] = v.size();
    emit_json(report, j);
    spdlog::info("{:.3f} subwords per word over {} lines", r.avg_subwords_per_word(), r.total_lines);
    return kExitOk;
  }
};

struct VocabTransferCmd {
  std::string old_vocab;
  std::string new_vocab;
  std::string old_emb;
  std::string out;
  std::string report;
  bool skip_specials = false;

  void attach(CLI::App* app) {
    app->add_option("--old-vocab", old_vocab, "Source vocab.txt")->required()->check(CLI::ExistingFile);
    app->add_option("--new-vocab", new_vocab, "Target vocab.txt")->required()->check(CLI::ExistingFile);
    app->add_option("--old-emb", old_emb, "Source embeddings (EMB1, or TSV when named *.tsv)")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output embeddings (EMB1, or TSV when named *.tsv)");
    app->add_option("--report", report, "Output path for the overlap JSON")->required();
    app->add_flag("--mean-skip-specials", skip_specials,
                  "Leave bracketed special rows out of the column mean")
        ->capture_default_str();
  }

  int run(const forge::PipelineConfig&, unsigned) const {
    namespace tr = forge::transfer;
    const auto ov = forge::tok::Vocabulary::load(old_vocab, false);
    const auto nv = forge::tok::Vocabulary::load(new_vocab, false);
    const auto overlap = tr::overlap_analysis(ov, nv);
    json j = tr::to_json(overlap);
    if (!out.empty()) {
      if (old_emb.empty()) throw forge::ConfigError("--out needs --old-emb");
      tr::EmbeddingMatrix old_m;
      if (has_tsv_extension(old_emb)) {
        std::ifstream in(old_emb, std::ios::binary);
        old_m = tr::read_tsv(in);
      } else {
        old_m = tr::read_emb1(fs::path(old_emb));
      }
      const auto excluded = skip_specials ? tr::bracketed_special_ids(ov) : std::vector<forge::tok::TokenId>{};
      const auto new_m = tr::apply_transfer(overlap, old_m, excluded);
      if (has_tsv_extension(out)) {
        auto o = open_output(out);
        tr::write_tsv(o, new_m);
      } else {
        tr::write_emb1(fs::path(out), new_m);
      }
      j["dims"] = new_m.dims();
      j["mean_excluded_rows"] = excluded.size();
    }
    write_json(report, j);
    spdlog::info("{} of {} new tokens shared ({})", overlap.shared_count, overlap.new_size,
                 tr::format_percent(overlap.overlap_fraction()));
    return kExitOk;
  }
};

struct MaskCmd {
  std::string input;
  std::string vocab;
  std::string keywords;
  std::string out;
  std::string report;
  forge::mask::MaskingConfig m;
  std::size_t max_len = 512;
  CLI::Option* mlm_prob = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* max_len_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input, "Corpus JSONL file")->required()->check(CLI::ExistingFile);
    app->add_option("--vocab", vocab, "vocab.txt with specials at ids 0-4")->required()->check(CLI::ExistingFile);
    app->add_option("--keywords", keywords, "Legal terms for keyword masking, one per line")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out, "Output JSONL of masked examples")->required();
    add_opt(app, "--report", report, "Optional path for dataset statistics JSON");
    mlm_prob = add_opt(app, "--mlm-prob", m.mlm_prob, "Fraction of maskable tokens to corrupt");
    seed = add_opt(app, "--seed", m.seed, "Masking seed");
    max_len_opt = add_opt(app, "--max-len", max_len, "Sequence length including [CLS] and [SEP]");
  }

  int run(const forge::PipelineConfig& cfg, unsigned threads) const {
    auto mc = cfg.masking;
    override_with(mlm_prob, m.mlm_prob, mc.mlm_prob);
    override_with(seed, m.seed, mc.seed);
    std::size_t ml = cfg.max_len;
    override_with(max_len_opt, max_len, ml);
    mc.validate();
    const auto v = forge::tok::Vocabulary::load(vocab);
    forge::mask::KeywordIndex kw;
    if (!keywords.empty()) kw = forge::mask::KeywordIndex::load(keywords);
    if (kw.size() == 0 && mc.strategy_weights[3] > 0) {
      spdlog::warn("no keywords loaded; keyword-strategy examples fall back to whole-word selection");
    }
    forge::mask::DatasetBuilder builder(v, kw, mc, ml, threads, cfg.tokenizer.max_word_chars);
    auto o = open_output(out);
    constexpr std::size_t kBatch = 2048;
    forge::CorpusReader reader(input);
    std::vector<forge::Document> batch;
    auto flush = [&] {
      for (const auto& ex : builder.process(batch)) o << forge::mask::to_jsonl(ex) << '\n';
      batch.clear();
    };
    while (auto d = reader.next()) {
      batch.push_back(std::move(*d));
      if (batch.size() == kBatch) flush();
    }
    flush();
    const auto& st = builder.stats();
    if (!report.empty()) write_json(report, st.to_json(mc, ml));
    spdlog::info("mask: {} examples from {} documents (seed {})", st.examples, st.documents, mc.seed);
    return kExitOk;
  }
};

struct EvalClozeCmd {
  std::string items;
  std::string preds;
  std::string report;
  forge::cloze::ClozeConfig c;
  CLI::Option* resamples = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* level = nullptr;
  CLI::Option* case_fold = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--items", items, "Cloze items JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--preds", preds, "Model predictions JSONL")->required()->check(CLI::ExistingFile);
    add_opt(app, "--report", report, "Output path for the report JSON ('-' or empty: stdout)");
    resamples = add_opt(app, "--resamples", c.resamples, "Bootstrap resamples (at least 1000)");
    seed = add_opt(app, "--seed", c.seed, "Bootstrap seed");
    level = add_opt(app, "--level", c.level, "Confidence level");
    case_fold = app->add_flag("--case-fold", c.match.case_fold, "Compare terms with Turkish case folding")
                    ->capture_default_str();
  }

  int run(const forge::PipelineConfig& cfg, unsigned threads) const {
    auto cc = cfg.cloze;
    override_with(resamples, c.resamples, cc.resamples);
    override_with(seed, c.seed, cc.seed);
    override_with(level, c.level, cc.level);
    override_with(case_fold, c.match.case_fold, cc.match.case_fold);
    const auto r = forge::cloze::evaluate_cloze(forge::cloze::read_items(items),
                                                forge::cloze::read_predictions(preds), cc, threads);
    emit_json(report, r.to_json());
    spdlog::info("top1 {:.2f}% [{:.2f}%, {:.2f}%], top3 {:.2f}% over {} items", 100 * r.top1, 100 * r.ci_top1.lo,
                 100 * r.ci_top1.hi, 100 * r.top3, r.n);
    return kExitOk;
  }
};

struct EvalSegCmd {
  std::string gold;
  std::string pred;
  std::string report;
  std::size_t tolerance = 5;
  CLI::Option* tol = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--gold", gold, "Gold tag sequences JSONL")->required()->check(CLI::ExistingFile);
    app->add_option("--pred", pred, "Predicted tag sequences JSONL")->required()->check(CLI::ExistingFile);
    add_opt(app, "--report", report, "Output path for the report JSON ('-' or empty: stdout)");
    tol = add_opt(app, "--tolerance", tolerance, "Boundary tolerance in words for tol_pass");
  }

  int run(const forge::PipelineConfig& cfg, unsigned) const {
    std::size_t t = cfg.seg_tolerance;
    override_with(tol, tolerance, t);
    const auto g = forge::seg::read_tag_sequences(gold);
    const auto p = forge::seg::read_tag_sequences(pred);
    const auto r = forge::seg::evaluate_segmentation(g, p, t);
    emit_json(report, r.to_json());
    spdlog::info("doc_pass {:.1f}%, tol_pass {:.1f}%, span_exact_f1 {:.1f}% over {} documents", 100 * r.doc_pass,
                 100 * r.tol_pass, 100 * r.span_exact_f1, r.n_docs);
    return kExitOk;
  }
};

struct WindowCmd {
  std::string input;
  std::string out;
  forge::seg::WindowConfig w;
  bool merge = false;
  CLI::Option* size = nullptr;
  CLI::Option* stride = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--input", input,
                    "Documents JSONL {doc_id, tokens[, tags]}; with --merge, windows JSONL "
                    "{doc_id, start, tokens, tags}")
        ->required()
        ->check(CLI::ExistingFile);
    add_opt(app, "--out", out, "Output JSONL ('-' or empty: stdout)");
    size = add_opt(app, "--size", w.size, "Window length in tokens");
    stride = add_opt(app, "--stride", w.stride, "Distance between window starts");
    app->add_flag("--merge", merge, "Merge per-window predictions back into documents")->capture_default_str();
  }

  static std::vector<json> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw forge::InputError("cannot open " + path);
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out.push_back(json::parse(line));
      } catch (const json::exception& e) {
        throw forge::InputError(path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
    return out;
  }

  static std::vector<std::string> string_array(const json& j, const char* key) {
    try {
      return j.at(key).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw forge::InputError(std::string("bad '") + key + "' field: " + e.what());
    }
  }

  void split(const forge::seg::WindowConfig& wc, std::ostream& o) const {
    for (const auto& doc : read_lines(input)) {
      const auto id = doc.value("doc_id", std::string());
      if (id.empty()) throw forge::InputError("document without doc_id");
      const auto tokens = string_array(doc, "tokens");
      const bool has_tags = doc.contains("tags");
      const auto tags = has_tags ? string_array(doc, "tags") : std::vector<std::string>{};
      if (has_tags && tags.size() != tokens.size()) throw forge::InputError("tags/tokens length mismatch in " + id);
      const auto windows = forge::seg::window_split(tokens.size(), wc);
      for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto& win = windows[k];
        json row = {{"doc_id", id},
                    {"window", k},
                    {"start", win.start},
                    {"tokens", std::vector<std::string>(tokens.begin() + win.start, tokens.begin() + win.end())}};
        if (has_tags) row["tags"] = std::vector<std::string>(tags.begin() + win.start, tags.begin() + win.end());
        o << row.dump() << '\n';
      }
    }
  }

  void merge_windows(std::ostream& o) const {
    struct Piece {
      forge::seg::TokenWindow win;
      std::vector<std::string> tokens;
      std::vector<std::string> tags;
    };
    std::map<std::string, std::vector<Piece>> docs;
    for (const auto& row : read_lines(input)) {
      Piece p;
      const auto id = row.value("doc_id", std::string());
      if (id.empty()) throw forge::InputError("window without doc_id");
      try {
        p.win.start = row.at("start").get<std::size_t>();
      } catch (const json::exception& e) {
        throw forge::InputError("bad window start in " + id + ": " + e.what());
      }
      p.tokens = string_array(row, "tokens");
      p.tags = string_array(row, "tags");
      if (p.tags.size() != p.tokens.size()) throw forge::InputError("tags/tokens length mismatch in " + id);
      p.win.length = p.tags.size();
      docs[id].push_back(std::move(p));
    }
    for (auto& [id, pieces] : docs) {
      std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.win.start < b.win.start; });
      std::size_t len = 0;
      std::vector<forge::seg::TokenWindow> wins;
      std::vector<std::vector<std::string>> toks;
      std::vector<std::vector<forge::seg::Tag>> tags;
      for (const auto& p : pieces) {
        len = std::max(len, p.win.end());
        wins.push_back(p.win);
        toks.push_back(p.tokens);
        std::vector<forge::seg::Tag> t;
        for (const auto& s : p.tags) t.push_back(forge::seg::parse_tag(s));
        tags.push_back(std::move(t));
      }
      forge::seg::TagSequence seq;
      seq.doc_id = id;
      seq.tokens = forge::seg::merge_window_predictions<std::string>(
          len, wins, std::span<const std::vector<std::string>>(toks));
      seq.tags = forge::seg::merge_window_predictions<forge::seg::Tag>(
          len, wins, std::span<const std::vector<forge::seg::Tag>>(tags));
      o << forge::seg::to_json(seq).dump() << '\n';
    }
  }

  int run(const forge::PipelineConfig& cfg, unsigned) const {
    auto wc = cfg.window;
    override_with(size, w.size, wc.size);
    override_with(stride, w.stride, wc.stride);
    wc.validate();
    std::ofstream file;
    std::ostream* o = &std::cout;
    if (!out.empty() && out != "-") {
      file = open_output(out);
      o = &file;
    }
    if (merge) {
      merge_windows(*o);
    } else {
      split(wc, *o);
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_logger_mt("forge");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"forge: corpus preparation and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--config", g.config_path, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
  g.threads_opt = app.add_option("--threads", g.threads,
                                 "Worker threads (default: FORGE_THREADS, then config, then all cores)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str()
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  StatsCmd stats;
  DedupCmd dedup;
  BalanceCmd bal;
  TrainTokenizerCmd train;
  TokenizeStatsCmd tstats;
  VocabTransferCmd transfer;
  MaskCmd mask;
  EvalClozeCmd cloze;
  EvalSegCmd seg;
  WindowCmd window;

  std::map<CLI::App*, std::function<int(const forge::PipelineConfig&, unsigned)>> runners;
  auto add = [&](const char* name, const char* desc, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, desc);
    cmd.attach(sub);
    runners[sub] = [&cmd](const forge::PipelineConfig& c, unsigned t) { return cmd.run(c, t); };
  };
  add("stats", "Per-group document counts and text bytes", stats);
  add("dedup", "Remove near-duplicate documents with MinHash LSH", dedup);
  add("balance", "Down- and over-sample groups toward byte targets", bal);
  add("train-tokenizer", "Train a WordPiece vocabulary with seed terms", train);
  add("tokenize-stats", "Subword fragmentation of a corpus under a vocabulary", tstats);
  add("vocab-transfer", "Vocabulary overlap and mean-initialized embedding transfer", transfer);
  add("mask", "Generate hybrid-masked MLM examples", mask);
  add("eval-cloze", "Score cloze predictions with bootstrap intervals", cloze);
  add("eval-seg", "BIO segmentation metrics", seg);
  add("window", "Split documents into sliding windows, or merge window predictions", window);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  try {
    forge::PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = forge::load_pipeline_config(g.config_path);
    unsigned threads = 0;
    if (g.threads_opt->count()) {
      threads = forge::resolve_threads(g.threads);
    } else if (const char* env = std::getenv("FORGE_THREADS"); (env && *env) || !cfg.threads) {
      threads = forge::resolve_threads();
    } else {
      threads = forge::resolve_threads(cfg.threads);
    }
    for (auto& [sub, run] : runners) {
      if (sub->parsed()) return run(cfg, threads);
    }
    return kExitConfig;
  } catch (const forge::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const forge::InputError& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
}
