#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/tokenizer.hpp"
#include "lexki/error.hpp"

namespace lexki::corpus {

struct DialogExample {
  std::vector<std::string> context;
  std::string utterance;
  std::string response;
  std::optional<std::string> knowledge;
};

inline void validate(const DialogExample& ex) {
  if (tokenize(ex.utterance).empty()) fail("InvariantError", "utterance has no tokens");
  if (tokenize(ex.response).empty()) fail("InvariantError", "response has no tokens");
}

inline DialogExample parse_dialog_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail("ParseError", "not a JSON object");
  DialogExample ex;
  if (!j.contains("utterance") || !j["utterance"].is_string())
    fail("ParseError", "missing string field \"utterance\"");
  if (!j.contains("response") || !j["response"].is_string())
    fail("ParseError", "missing string field \"response\"");
  ex.utterance = j["utterance"].get<std::string>();
  ex.response = j["response"].get<std::string>();
  if (j.contains("context") && !j["context"].is_null()) {
    if (!j["context"].is_array()) fail("ParseError", "\"context\" must be an array of strings");
    for (const auto& turn : j["context"]) {
      if (!turn.is_string()) fail("ParseError", "\"context\" must be an array of strings");
      ex.context.push_back(turn.get<std::string>());
    }
  }
  if (j.contains("knowledge") && !j["knowledge"].is_null()) {
    if (!j["knowledge"].is_string()) fail("ParseError", "\"knowledge\" must be a string");
    ex.knowledge = j["knowledge"].get<std::string>();
  }
  return ex;
}

// JSON-lines {"context": [..], "utterance", "response", "knowledge"?}, in
// file order. Blank lines are skipped but still counted for error messages.
inline std::vector<DialogExample> load_dialog_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("IoError", "cannot open dialog corpus '", path, "'");
  std::vector<DialogExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      DialogExample ex = parse_dialog_line(line);
      validate(ex);
      out.push_back(std::move(ex));
    } catch (const Error& e) {
      fail(e.kind(), path, ":", lineno, ": ", e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const DialogExample& ex) {
  nlohmann::ordered_json j;
  j["context"] = ex.context;
  j["utterance"] = ex.utterance;
  j["response"] = ex.response;
  if (ex.knowledge) j["knowledge"] = *ex.knowledge;
  return j;
}

inline void save_dialog_corpus(const std::string& path, const std::vector<DialogExample>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("IoError", "cannot write dialog corpus '", path, "'");
  for (const auto& ex : corpus) out << to_json(ex).dump() << '\n';
}

}  // namespace lexki::corpus
