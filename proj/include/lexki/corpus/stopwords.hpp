#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lexki/corpus/tokenizer.hpp"
#include "lexki/error.hpp"

namespace lexki::corpus {

// Mirrors data/stopwords.txt.
inline const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words{
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
      "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
      "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
      "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
      "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
      "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
      "for", "with", "about", "against", "between", "into", "through", "during", "before",
      "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
      "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
      "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
      "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
      "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
      "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn", "would", "could", "also",
      "yes", "yeah", "oh", "ok"};
  return words;
}

class StopwordList {
 public:
  StopwordList() = default;
  explicit StopwordList(const std::vector<std::string>& words) {
    for (const auto& w : words) words_.insert(to_lower(w));
  }

  static StopwordList defaults() { return StopwordList(default_stopwords()); }

  // One word per line; blank lines and lines starting with '#' are skipped.
  static StopwordList load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open stopword file '", path, "'");
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      words.push_back(line);
    }
    return StopwordList(words);
  }

  bool contains(std::string_view word) const { return words_.count(to_lower(word)) > 0; }

  // Stopwords and punctuation-only tokens carry no alignment.
  bool masks(std::string_view token) const { return is_punct_token(token) || contains(token); }

  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

}  // namespace lexki::corpus
