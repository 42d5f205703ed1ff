#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/error.hpp"

namespace lexki::corpus {

enum class AlignmentSource { Retrieved, ExactMatch };

inline const char* source_name(AlignmentSource s) {
  return s == AlignmentSource::Retrieved ? "retrieved" : "exact_match";
}

// Links utterance token token_index of example example_id to a knowledge item.
struct AlignmentRecord {
  std::size_t example_id = 0;
  std::size_t token_index = 0;
  KnowledgeId knowledge_id = 0;
  std::optional<double> score;  // absent for exact matches
  AlignmentSource source = AlignmentSource::Retrieved;

  bool operator==(const AlignmentRecord&) const = default;
};

inline bool position_less(const AlignmentRecord& a, const AlignmentRecord& b) {
  return std::tie(a.example_id, a.token_index) < std::tie(b.example_id, b.token_index);
}

inline nlohmann::json to_json(const AlignmentRecord& r) {
  nlohmann::json j;
  j["example_id"] = r.example_id;
  j["token_index"] = r.token_index;
  j["knowledge_id"] = r.knowledge_id;
  if (r.score) j["score"] = *r.score;
  j["source"] = source_name(r.source);
  return j;
}

inline AlignmentRecord alignment_from_json(const nlohmann::json& j) {
  auto uint_field = [&](const char* key) -> std::size_t {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0)
      fail("ParseError", "field \"", key, "\" must be a non-negative integer");
    return j[key].get<std::size_t>();
  };
  AlignmentRecord r;
  r.example_id = uint_field("example_id");
  r.token_index = uint_field("token_index");
  r.knowledge_id = uint_field("knowledge_id");
  if (!j.contains("source") || !j["source"].is_string()) fail("ParseError", "missing string field \"source\"");
  const std::string src = j["source"].get<std::string>();
  if (src == "retrieved") {
    r.source = AlignmentSource::Retrieved;
  } else if (src == "exact_match") {
    r.source = AlignmentSource::ExactMatch;
  } else {
    fail("ParseError", "unknown alignment source '", src, "'");
  }
  if (j.contains("score") && !j["score"].is_null()) {
    if (!j["score"].is_number()) fail("ParseError", "\"score\" must be a number");
    if (r.source == AlignmentSource::ExactMatch) fail("ParseError", "exact_match records carry no score");
    r.score = j["score"].get<double>();
  }
  return r;
}

inline void save_alignments(const std::string& path, const std::vector<AlignmentRecord>& records) {
  std::ofstream out(path);
  if (!out) fail("IoError", "cannot write alignments '", path, "'");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<AlignmentRecord> load_alignments(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot open alignments '", path, "'");
  std::vector<AlignmentRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail("ParseError", path, ":", lineno, ": not a JSON object");
    try {
      out.push_back(alignment_from_json(j));
    } catch (const Error& e) {
      fail(e.kind(), path, ":", lineno, ": ", e.what());
    }
  }
  return out;
}

// Records grouped by example id; out[e] lists the records of example e.
inline std::vector<std::vector<AlignmentRecord>> group_by_example(const std::vector<AlignmentRecord>& records,
                                                                  std::size_t n_examples) {
  std::vector<std::vector<AlignmentRecord>> out(n_examples);
  for (const auto& r : records)
    if (r.example_id < n_examples) out[r.example_id].push_back(r);
  for (auto& v : out) std::stable_sort(v.begin(), v.end(), position_less);
  return out;
}

}  // namespace lexki::corpus
