#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexki/error.hpp"

namespace lexki::corpus {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReserved = 4;

// Reserved surface forms contain '<' and '>', which the tokenizer always
// splits off, so they cannot collide with corpus tokens.
inline const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r{"<pad>", "<bos>", "<eos>", "<unk>"};
  return r;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (const auto& t : reserved_tokens()) push(t);
  }

  // Reserved tokens first, then the most frequent tokens up to max_size in
  // total; frequency ties are broken lexicographically.
  static Vocabulary build(const std::vector<std::vector<std::string>>& streams,
                          std::size_t max_size) {
    if (max_size < kReserved + 1) fail("ConfigError", "vocabulary max_size must be >= 5");
    std::map<std::string, std::size_t> freq;
    for (const auto& s : streams)
      for (const auto& t : s) ++freq[t];
    for (const auto& r : reserved_tokens()) freq.erase(r);
    std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (const auto& [tok, n] : items) {
      if (v.size() >= max_size) break;
      v.push(tok);
    }
    return v;
  }

  // Exact token list as stored; reserved tokens must come first.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, const std::string& origin = "vocabulary") {
    Vocabulary v;
    v.tokens_.clear();
    v.index_.clear();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (v.index_.count(tokens[i])) fail("ParseError", origin, ":", i + 1, ": duplicate token '", tokens[i], "'");
      v.push(tokens[i]);
    }
    for (std::size_t i = 0; i < kReserved; ++i) {
      if (v.tokens_.size() <= i || v.tokens_[i] != reserved_tokens()[i]) {
        fail("ParseError", origin, ": reserved token '", reserved_tokens()[i], "' missing at line ", i + 1);
      }
    }
    return v;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open vocabulary file '", path, "'");
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(tokens, path);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write vocabulary file '", path, "'");
    for (const auto& t : tokens_) out << t << '\n';
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

  TokenId id(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      fail("InvariantError", "token id ", id, " outside vocabulary of size ", tokens_.size());
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::vector<TokenId> encode(const std::vector<std::string>& toks) const {
    std::vector<TokenId> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  std::vector<std::string> decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId i : ids) out.push_back(token(i));
    return out;
  }

  // FNV-1a over the serialized form; stored in checkpoints.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      for (unsigned char c : t) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= static_cast<unsigned char>('\n');
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  void push(const std::string& t) {
    index_[t] = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace lexki::corpus
