#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace lexki::corpus {

inline bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c); }

inline bool is_punct_token(std::string_view tok) {
  if (tok.empty()) return false;
  for (unsigned char c : tok)
    if (!is_ascii_punct(c)) return false;
  return true;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

// Lowercases, splits on whitespace, and emits each ASCII punctuation
// character as its own token. Non-ASCII bytes stay inside words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128 && std::isspace(u)) {
      flush();
    } else if (is_ascii_punct(u)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return out;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// Space-joined text with apostrophes reattached inside words, so
// {"i", "don", "'", "t"} reads "i don't". tokenize() inverts it.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  auto wordy = [](const std::string& t) { return !t.empty() && !is_punct_token(t); };
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool glued = i > 0 && ((tokens[i] == "'" && wordy(tokens[i - 1]) && i + 1 < tokens.size() &&
                                  wordy(tokens[i + 1])) ||
                                 (tokens[i - 1] == "'" && i >= 2 && wordy(tokens[i - 2]) && wordy(tokens[i])));
    if (i > 0 && !glued) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace lexki::corpus
