#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "forge/common.hpp"
#include "forge/text.hpp"

namespace forge {

/// One legal text with its three-level sub-domain taxonomy.
struct Document {
  std::string id;
  std::string field;
  std::string content;
  std::optional<std::string> topic;
  std::string text;

  bool operator==(const Document&) const = default;
};

/// Group key used by stats, balancing targets and reports:
/// "field/content/topic", or "field/content" when the topic is null.
inline std::string group_key(std::string_view field, std::string_view content,
                             const std::optional<std::string>& topic) {
  std::string key;
  key.reserve(field.size() + content.size() + 2 + (topic ? topic->size() : 0));
  key.append(field).append("/").append(content);
  if (topic) key.append("/").append(*topic);
  return key;
}

inline std::string group_key(const Document& d) {
  return group_key(d.field, d.content, d.topic);
}

/// Parses one JSONL record. Throws InputError describing the defect.
inline Document parse_document(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("record is not a JSON object");

  auto required_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("missing key '") + key + "'");
    if (!it->is_string()) throw InputError(std::string("key '") + key + "' is not a string");
    return it->get<std::string>();
  };

  Document d;
  d.id = required_string("id");
  d.field = required_string("field");
  d.content = required_string("content");
  d.text = required_string("text");
  if (auto it = j.find("topic"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw InputError("key 'topic' is neither string nor null");
    d.topic = it->get<std::string>();
  }

  if (d.id.empty()) throw InputError("empty id");
  if (!text::is_valid_utf8(d.text)) throw InputError("text is not valid UTF-8");
  if (text::trim(d.text).empty()) throw InputError("text is blank");
  return d;
}

inline nlohmann::json to_json(const Document& d) {
  nlohmann::json j;
  j["id"] = d.id;
  j["field"] = d.field;
  j["content"] = d.content;
  j["topic"] = d.topic ? nlohmann::json(*d.topic) : nlohmann::json(nullptr);
  j["text"] = d.text;
  return j;
}

inline std::string to_jsonl(const Document& d) { return to_json(d).dump(); }

enum class ReadMode { strict, lenient };

/// Streaming JSONL reader. Duplicate ids abort in both modes.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path, ReadMode mode = ReadMode::strict)
      : path_(path), in_(path, std::ios::binary), mode_(mode) {
    if (!in_) throw InputError("cannot open corpus file: " + path.string());
  }

  std::optional<Document> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      Document d;
      try {
        d = parse_document(line);
      } catch (const InputError& e) {
        if (mode_ == ReadMode::strict) throw InputError(where() + e.what());
        ++skipped_;
        continue;
      }
      if (!seen_.insert(d.id).second) throw InputError(where() + "duplicate id '" + d.id + "'");
      return d;
    }
    return std::nullopt;
  }

  std::size_t skipped() const { return skipped_; }

 private:
  std::string where() const {
    return path_.string() + ":" + std::to_string(line_no_) + ": ";
  }

  std::filesystem::path path_;
  std::ifstream in_;
  ReadMode mode_;
  std::size_t line_no_ = 0;
  std::size_t skipped_ = 0;
  std::unordered_set<std::string> seen_;
};

inline std::vector<Document> read_corpus(const std::filesystem::path& path,
                                         ReadMode mode = ReadMode::strict,
                                         std::size_t* skipped = nullptr) {
  CorpusReader reader(path, mode);
  std::vector<Document> docs;
  while (auto d = reader.next()) docs.push_back(std::move(*d));
  if (skipped) *skipped = reader.skipped();
  return docs;
}

class CorpusWriter {
 public:
  explicit CorpusWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw InputError("cannot write corpus file: " + path.string());
  }
  void write(const Document& d) { out_ << to_jsonl(d) << '\n'; }

 private:
  std::ofstream out_;
};

inline void write_corpus(const std::filesystem::path& path,
                         const std::vector<Document>& docs) {
  CorpusWriter w(path);
  for (const auto& d : docs) w.write(d);
}

struct GroupStats {
  std::uint64_t doc_count = 0;
  std::uint64_t byte_size = 0;

  bool operator==(const GroupStats&) const = default;
};

/// Per-group document counts and text byte sizes. Aggregation is a
/// commutative merge, so results do not depend on input order.
struct CorpusStats {
  std::map<std::string, GroupStats> groups;
  GroupStats total;

  void add(const Document& d) {
    auto& g = groups[group_key(d)];
    g.doc_count += 1;
    g.byte_size += d.text.size();
    total.doc_count += 1;
    total.byte_size += d.text.size();
  }

  void merge(const CorpusStats& other) {
    for (const auto& [k, g] : other.groups) {
      auto& mine = groups[k];
      mine.doc_count += g.doc_count;
      mine.byte_size += g.byte_size;
    }
    total.doc_count += other.total.doc_count;
    total.byte_size += other.total.byte_size;
  }

  bool operator==(const CorpusStats&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    j["schema_version"] = kSchemaVersion;
    for (const auto& [k, g] : groups) {
      j[k] = {{"doc_count", g.doc_count}, {"byte_size", g.byte_size}};
    }
    j["TOTAL"] = {{"doc_count", total.doc_count}, {"byte_size", total.byte_size}};
    return j;
  }

  static CorpusStats from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("stats report must be a JSON object");
    CorpusStats s;
    for (const auto& [k, v] : j.items()) {
      if (k == "schema_version") continue;
      GroupStats g{v.at("doc_count").get<std::uint64_t>(),
                   v.at("byte_size").get<std::uint64_t>()};
      if (k == "TOTAL") {
        s.total = g;
      } else {
        s.groups[k] = g;
      }
    }
    return s;
  }
};

template <typename Range>
CorpusStats corpus_stats(const Range& docs) {
  CorpusStats s;
  for (const Document& d : docs) s.add(d);
  return s;
}

}  // namespace forge
