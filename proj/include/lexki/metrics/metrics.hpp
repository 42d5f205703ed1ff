#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexki/corpus/alignment.hpp"
#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/corpus/tokenizer.hpp"
#include "lexki/error.hpp"

namespace lexki::metrics {

using Tokens = std::vector<std::string>;

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> c;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++c[Tokens(t.begin() + i, t.begin() + i + n)];
  return c;
}

inline void check_lengths(std::size_t h, std::size_t r) {
  if (h != r) fail("LengthMismatch", h, " hypotheses against ", r, " references");
}

inline std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

// Distinct n-grams over all n-grams pooled across responses.
inline double distinct_n(const std::vector<Tokens>& responses, std::size_t n) {
  if (n != 1 && n != 2) fail("ConfigError", "distinct-n supports n = 1 or 2, got ", n);
  std::set<Tokens> seen;
  std::size_t total = 0;
  for (const auto& r : responses) {
    for (std::size_t i = 0; i + n <= r.size(); ++i) {
      seen.insert(Tokens(r.begin() + i, r.begin() + i + n));
      ++total;
    }
  }
  return total ? double(seen.size()) / double(total) : 0.0;
}

// Corpus BLEU-4 on a 0-100 scale: clipped n-gram matches and hypothesis
// n-gram totals are pooled over the corpus before taking ratios.
inline double bleu4(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  detail::check_lengths(hyps.size(), refs.size());
  std::size_t match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0}, hyp_len = 0, ref_len = 0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    hyp_len += hyps[k].size();
    ref_len += refs[k].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = detail::ngram_counts(hyps[k], n);
      const auto r = detail::ngram_counts(refs[k], n);
      for (const auto& [g, c] : h) {
        auto it = r.find(g);
        match[n - 1] += it == r.end() ? 0 : std::min(c, it->second);
        total[n - 1] += c;
      }
    }
  }
  double log_p = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (match[n] == 0 || total[n] == 0) return 0.0;
    log_p += std::log(double(match[n]) / double(total[n]));
  }
  const double bp = hyp_len < ref_len ? std::exp(1.0 - double(ref_len) / double(hyp_len)) : 1.0;
  return 100.0 * bp * std::exp(log_p / 4.0);
}

// Mean per-pair LCS F1; two empty sequences count as identical.
inline double rouge_l(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  detail::check_lengths(hyps.size(), refs.size());
  if (hyps.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    if (hyps[k].empty() && refs[k].empty()) {
      sum += 1.0;
      continue;
    }
    if (hyps[k].empty() || refs[k].empty()) continue;
    const double l = double(detail::lcs(hyps[k], refs[k]));
    sum += detail::f1(l / double(hyps[k].size()), l / double(refs[k].size()));
  }
  return sum / double(hyps.size());
}

// Lowercase, map typographic apostrophes to ASCII.
inline std::string normalize_apostrophes(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(s[i + 2]) == 0x98 || static_cast<unsigned char>(s[i + 2]) == 0x99)) {
      out += '\'';
      i += 2;
    } else if (i + 1 < s.size() && static_cast<unsigned char>(s[i]) == 0xCA &&
               static_cast<unsigned char>(s[i + 1]) == 0xBC) {
      out += '\'';
      i += 1;
    } else {
      out += s[i];
    }
  }
  return corpus::to_lower(out);
}

inline bool is_safe(const std::string& response) {
  const std::string s = normalize_apostrophes(response);
  return s.find("i'm not sure") != std::string::npos || s.find("i don't know") != std::string::npos;
}

inline double safe_rate(const std::vector<std::string>& responses) {
  if (responses.empty()) fail("EmptyCorpus", "safe rate of an empty response list");
  std::size_t n = 0;
  for (const auto& r : responses) n += is_safe(r) ? 1 : 0;
  return double(n) / double(responses.size());
}

// Mean unigram F1 against the grounded knowledge; pairs without knowledge
// are skipped.
inline double wiki_f1(const std::vector<Tokens>& responses, const std::vector<std::optional<Tokens>>& knowledge) {
  detail::check_lengths(responses.size(), knowledge.size());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < responses.size(); ++k) {
    if (!knowledge[k]) continue;
    ++pairs;
    const auto r = detail::ngram_counts(responses[k], 1);
    const auto g = detail::ngram_counts(*knowledge[k], 1);
    std::size_t overlap = 0;
    for (const auto& [w, c] : r) {
      auto it = g.find(w);
      if (it != g.end()) overlap += std::min(c, it->second);
    }
    if (overlap == 0) continue;
    sum += detail::f1(double(overlap) / double(responses[k].size()), double(overlap) / double(knowledge[k]->size()));
  }
  if (pairs == 0) fail("NoKnowledge", "no response is paired with knowledge");
  return sum / double(pairs);
}

// Mean count of tokens per response matching a single-token KB title.
inline double entity_score(const std::vector<Tokens>& responses, const corpus::KnowledgeBase& kb) {
  if (responses.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& r : responses)
    for (const auto& t : r) n += kb.match_title(t) ? 1 : 0;
  return double(n) / double(responses.size());
}

// Per example, the share of content tokens of the gold response found in the
// union of the mined knowledge sentences; mean over examples that have
// content tokens.
inline double knowledge_coverage(const std::vector<Tokens>& gold, const std::vector<corpus::AlignmentRecord>& alignments,
                                 const corpus::KnowledgeBase& kb, const corpus::StopwordList& stopwords) {
  std::vector<std::set<corpus::KnowledgeId>> mined(gold.size());
  for (const auto& r : alignments) {
    if (r.example_id >= gold.size()) fail("InvariantError", "alignment for example ", r.example_id, " outside the corpus");
    if (r.knowledge_id >= kb.size()) fail("InvariantError", "alignment knowledge id ", r.knowledge_id, " outside the KB");
    mined[r.example_id].insert(r.knowledge_id);
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t e = 0; e < gold.size(); ++e) {
    std::set<std::string> pool;
    for (auto k : mined[e])
      for (auto& t : corpus::tokenize(kb[k].text)) pool.insert(t);
    std::size_t content = 0, hit = 0;
    for (const auto& t : gold[e]) {
      if (stopwords.masks(t)) continue;
      ++content;
      hit += pool.count(t);
    }
    if (content == 0) continue;
    ++counted;
    sum += double(hit) / double(content);
  }
  return counted ? sum / double(counted) : 0.0;
}

struct Throughput {
  double sentences_per_sec = 0.0;
  double tokens_per_sec = 0.0;
  double total_seconds = 0.0;
};

inline Throughput throughput(std::size_t sentences, std::size_t tokens, double seconds) {
  const double s = std::max(seconds, 1e-6);
  return {double(sentences) / s, double(tokens) / s, s};
}

struct EvalReport {
  std::optional<double> ppl;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double safe_rate = 0.0;
  std::optional<double> wiki_f1;
  std::optional<double> entity_score;
  std::optional<double> knowledge_coverage;
  Throughput speed;

  void validate() const {
    auto rate = [](const char* name, double v) {
      if (!(v >= 0.0 && v <= 1.0)) fail("InvariantError", name, " = ", v, " outside [0, 1]");
    };
    rate("rouge_l", rouge_l);
    rate("distinct1", distinct1);
    rate("distinct2", distinct2);
    rate("safe_rate", safe_rate);
    if (wiki_f1) rate("wiki_f1", *wiki_f1);
    if (knowledge_coverage) rate("knowledge_coverage", *knowledge_coverage);
    if (!(bleu4 >= 0.0 && bleu4 <= 100.0)) fail("InvariantError", "bleu4 = ", bleu4, " outside [0, 100]");
    if (ppl && !(*ppl >= 1.0)) fail("InvariantError", "ppl = ", *ppl, " below 1");
    if (entity_score && !(*entity_score >= 0.0)) fail("InvariantError", "entity_score negative");
    if (speed.sentences_per_sec < 0.0 || speed.tokens_per_sec < 0.0) fail("InvariantError", "negative throughput");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    if (ppl) j["ppl"] = *ppl;
    j["bleu4"] = bleu4;
    j["rouge_l"] = rouge_l;
    j["distinct1"] = distinct1;
    j["distinct2"] = distinct2;
    j["safe_rate"] = safe_rate;
    if (wiki_f1) j["wiki_f1"] = *wiki_f1;
    if (entity_score) j["entity_score"] = *entity_score;
    if (knowledge_coverage) j["knowledge_coverage"] = *knowledge_coverage;
    j["sentences_per_sec"] = speed.sentences_per_sec;
    j["tokens_per_sec"] = speed.tokens_per_sec;
    j["total_seconds"] = speed.total_seconds;
    return j;
  }
};

// Checks a parsed report object for required keys and value ranges.
inline EvalReport report_from_json(const nlohmann::json& j) {
  auto num = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number()) fail("ParseError", "report field '", key, "' missing or not a number");
    return j[key].get<double>();
  };
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return num(key);
  };
  EvalReport r;
  r.ppl = opt("ppl");
  r.bleu4 = num("bleu4");
  r.rouge_l = num("rouge_l");
  r.distinct1 = num("distinct1");
  r.distinct2 = num("distinct2");
  r.safe_rate = num("safe_rate");
  r.wiki_f1 = opt("wiki_f1");
  r.entity_score = opt("entity_score");
  r.knowledge_coverage = opt("knowledge_coverage");
  r.speed = {num("sentences_per_sec"), num("tokens_per_sec"), num("total_seconds")};
  r.validate();
  return r;
}

}  // namespace lexki::metrics
