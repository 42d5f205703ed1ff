#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lexki/corpus/tokenizer.hpp"
#include "lexki/error.hpp"

namespace lexki::corpus {

using KnowledgeId = std::size_t;

struct KnowledgeItem {
  KnowledgeId id = 0;
  std::string title;
  std::string text;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Word immediately before position `end` (exclusive), letters only.
inline std::string_view word_before(std::string_view s, std::size_t end) {
  std::size_t b = end;
  while (b > 0 && std::isalpha(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(b, end - b);
}

inline bool is_abbreviation(std::string_view word) {
  static const std::array<std::string_view, 14> known{"mr", "mrs", "ms", "dr", "st", "jr", "sr",
                                                      "prof", "mt", "vs", "etc", "inc", "co", "ltd"};
  if (word.size() == 1 && std::isupper(static_cast<unsigned char>(word[0]))) return true;
  const std::string lower = to_lower(word);
  for (auto k : known)
    if (lower == k) return true;
  return false;
}

}  // namespace detail

// First sentence of an article: the prefix up to the first '.', '!' or '?'
// followed by whitespace and an uppercase letter. Periods after initials and
// common abbreviations do not end a sentence, and a prefix shorter than five
// tokens is extended to the next boundary.
inline std::string extract_first_sentence(std::string_view article_text) {
  const std::string_view text = detail::trim(article_text);
  if (text.empty()) fail("EmptyArticle", "article text is empty or whitespace-only");
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !std::isspace(static_cast<unsigned char>(text[j]))) continue;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j >= text.size() || !std::isupper(static_cast<unsigned char>(text[j]))) continue;
    if (c == '.' && detail::is_abbreviation(detail::word_before(text, i))) continue;
    const std::string_view prefix = text.substr(0, i + 1);
    if (tokenize(prefix).size() >= 5) return std::string(prefix);
  }
  return std::string(text);
}

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  // Appends an item; its id is its position.
  KnowledgeId add(std::string title, std::string text) {
    if (detail::trim(text).empty()) fail("InvariantError", "knowledge text for '", title, "' is empty");
    const KnowledgeId id = items_.size();
    const auto toks = tokenize(title);
    if (toks.size() == 1 && !title_index_.count(toks[0])) title_index_[toks[0]] = id;
    items_.push_back(KnowledgeItem{id, std::move(title), std::move(text)});
    return id;
  }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const KnowledgeItem& operator[](KnowledgeId id) const { return items_.at(id); }
  const std::vector<KnowledgeItem>& items() const noexcept { return items_; }

  // Lowercased single-token titles; the first article with a title wins.
  const std::unordered_map<std::string, KnowledgeId>& title_index() const noexcept {
    return title_index_;
  }

  std::optional<KnowledgeId> match_title(const std::string& token) const {
    auto it = title_index_.find(to_lower(token));
    if (it == title_index_.end()) return std::nullopt;
    return it->second;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write knowledge base '", path, "'");
    for (const auto& item : items_) {
      nlohmann::ordered_json j;
      j["id"] = item.id;
      j["title"] = item.title;
      j["text"] = item.text;
      out << j.dump() << '\n';
    }
  }

  static KnowledgeBase load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open knowledge base '", path, "'");
    KnowledgeBase kb;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() ||
          !j.contains("title") || !j["title"].is_string() || !j.contains("text") ||
          !j["text"].is_string()) {
        fail("ParseError", path, ":", lineno, ": expected {\"id\": int, \"title\": string, \"text\": string}");
      }
      if (j["id"].get<std::size_t>() != kb.size()) {
        fail("ParseError", path, ":", lineno, ": id ", j["id"].get<std::size_t>(), " out of order, expected ",
             kb.size());
      }
      try {
        kb.add(j["title"].get<std::string>(), j["text"].get<std::string>());
      } catch (const Error& e) {
        fail("ParseError", path, ":", lineno, ": ", e.what());
      }
    }
    return kb;
  }

 private:
  std::vector<KnowledgeItem> items_;
  std::unordered_map<std::string, KnowledgeId> title_index_;
};

// One item per article record {"title", "text"}, in file order, holding the
// article's first sentence.
inline KnowledgeBase build_knowledge_base(const std::string& articles_path) {
  std::ifstream in(articles_path);
  if (!in) fail("IoError", "cannot open articles file '", articles_path, "'");
  KnowledgeBase kb;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("title") || !j["title"].is_string() ||
        !j.contains("text") || !j["text"].is_string()) {
      fail("ParseError", articles_path, ":", lineno,
           ": expected {\"title\": string, \"text\": string}");
    }
    std::string sentence;
    try {
      sentence = extract_first_sentence(j["text"].get<std::string>());
    } catch (const Error& e) {
      fail(e.kind(), articles_path, ":", lineno, ": ", e.what());
    }
    kb.add(j["title"].get<std::string>(), std::move(sentence));
  }
  return kb;
}

}  // namespace lexki::corpus
