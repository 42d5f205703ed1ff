#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lexki/corpus/alignment.hpp"
#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/corpus/vocabulary.hpp"
#include "lexki/nn/pca.hpp"
#include "lexki/nn/rng.hpp"

namespace lexki::analysis {

using corpus::AlignmentRecord;
using corpus::KnowledgeId;

enum class VariantKind { TokenLevel, Random, SentenceLevel, FactualOnly, LinguisticOnly };

inline const char* variant_name(VariantKind k) {
  switch (k) {
    case VariantKind::TokenLevel: return "token_level";
    case VariantKind::Random: return "random";
    case VariantKind::SentenceLevel: return "sentence_level";
    case VariantKind::FactualOnly: return "factual_only";
    case VariantKind::LinguisticOnly: return "linguistic_only";
  }
  return "?";
}

inline VariantKind parse_variant(const std::string& s) {
  for (auto k : {VariantKind::TokenLevel, VariantKind::Random, VariantKind::SentenceLevel, VariantKind::FactualOnly,
                 VariantKind::LinguisticOnly})
    if (s == variant_name(k)) return k;
  fail("ConfigError", "unknown variant '", s, "'");
}

struct VariantSpec {
  VariantKind kind = VariantKind::TokenLevel;
  std::uint64_t seed = 1;
};

// Every record keeps its position; its knowledge id becomes a uniform draw
// over the KB. Replaced ids carry no retrieval score.
inline std::vector<AlignmentRecord> make_random_variant(const std::vector<AlignmentRecord>& alignments,
                                                        std::size_t kb_size, std::uint64_t seed) {
  if (kb_size == 0) fail("EmptyCorpus", "random variant needs a non-empty knowledge base");
  nn::Rng rng(seed);
  std::vector<AlignmentRecord> out = alignments;
  for (auto& r : out) {
    r.knowledge_id = rng.below(kb_size);
    r.source = corpus::AlignmentSource::Retrieved;
    r.score.reset();
  }
  return out;
}

// Per utterance, every record takes the most frequent knowledge id among
// that utterance's records; ties go to the lowest id.
inline std::vector<AlignmentRecord> make_sentence_level_variant(const std::vector<AlignmentRecord>& alignments) {
  std::map<std::size_t, std::map<KnowledgeId, std::size_t>> counts;
  for (const auto& r : alignments) ++counts[r.example_id][r.knowledge_id];
  std::map<std::size_t, KnowledgeId> mode;
  for (const auto& [e, c] : counts) {
    KnowledgeId best = c.begin()->first;
    for (const auto& [k, n] : c)
      if (n > c.at(best)) best = k;
    mode[e] = best;
  }
  std::vector<AlignmentRecord> out = alignments;
  for (auto& r : out) {
    if (r.knowledge_id == mode[r.example_id]) continue;
    r.knowledge_id = mode[r.example_id];
    r.source = corpus::AlignmentSource::Retrieved;
    r.score.reset();
  }
  return out;
}

// Lowercased single-token KB titles plus an optional word-per-line file.
inline std::set<std::string> noun_lexicon(const corpus::KnowledgeBase& kb, const std::string& path = "") {
  std::set<std::string> lex;
  for (const auto& [t, id] : kb.title_index()) lex.insert(t);
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open lexicon '", path, "'");
    for (std::string w; in >> w;) lex.insert(corpus::to_lower(w));
  }
  return lex;
}

struct FactualSplit {
  std::vector<AlignmentRecord> factual, linguistic;
};

// Records on lexicon tokens are factual, the rest linguistic.
inline FactualSplit split_factual_linguistic(const std::vector<AlignmentRecord>& alignments,
                                             const std::vector<std::vector<std::string>>& utterances,
                                             const std::set<std::string>& lexicon) {
  FactualSplit s;
  for (const auto& r : alignments) {
    if (r.example_id >= utterances.size() || r.token_index >= utterances[r.example_id].size())
      fail("InvariantError", "alignment (", r.example_id, ", ", r.token_index, ") outside the corpus");
    (lexicon.count(corpus::to_lower(utterances[r.example_id][r.token_index])) ? s.factual : s.linguistic).push_back(r);
  }
  return s;
}

inline std::vector<AlignmentRecord> make_variant(const VariantSpec& spec, const std::vector<AlignmentRecord>& alignments,
                                                 const corpus::KnowledgeBase& kb,
                                                 const std::vector<std::vector<std::string>>& utterances,
                                                 const std::set<std::string>& lexicon) {
  switch (spec.kind) {
    case VariantKind::TokenLevel: return alignments;
    case VariantKind::Random: return make_random_variant(alignments, kb.size(), spec.seed);
    case VariantKind::SentenceLevel: return make_sentence_level_variant(alignments);
    case VariantKind::FactualOnly: return split_factual_linguistic(alignments, utterances, lexicon).factual;
    case VariantKind::LinguisticOnly: return split_factual_linguistic(alignments, utterances, lexicon).linguistic;
  }
  return alignments;
}

template <typename T>
double row_distance(const nn::Tensor<T>& table, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t j = 0; j < table.cols(); ++j) {
    const double d = double(table(a, j)) - double(table(b, j));
    s += d * d;
  }
  return std::sqrt(s);
}

// PCA coordinates and pairwise Euclidean distances of raw embedding rows.
template <typename T>
nlohmann::ordered_json embedding_report(const nn::Tensor<T>& table, const corpus::Vocabulary& vocab,
                                        const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  for (const auto& t : tokens) {
    if (!vocab.contains(t)) fail("UnknownToken", "token '", t, "' is not in the vocabulary");
    ids.push_back(static_cast<std::size_t>(vocab.id(t)));
  }
  if (ids.empty()) fail("InvariantError", "embedding report needs at least one token");
  nn::Tensor<double> rows(ids.size(), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < table.cols(); ++j) rows(i, j) = double(table(ids[i], j));
  nlohmann::ordered_json j;
  j["reference"] = {{"note", "full-scale reference distances between an entity and a related attribute token"},
                    {"transformer", 0.37},
                    {"knowledge_internalized", 0.22}};
  nlohmann::ordered_json coords = nlohmann::ordered_json::array();
  if (ids.size() >= 2) {
    const auto c = nn::pca_2d(rows);
    for (std::size_t i = 0; i < ids.size(); ++i) coords.push_back({c(i, 0), c(i, 1)});
  } else {
    coords.push_back({0.0, 0.0});
  }
  j["coords"] = coords;
  j["labels"] = tokens;
  nlohmann::ordered_json dist = nlohmann::ordered_json::object();
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b) dist[tokens[a] + "|" + tokens[b]] = row_distance(rows, a, b);
  j["distances"] = dist;
  return j;
}

// Mean Euclidean distance between the embedding of each aligned utterance
// token and the embeddings of its knowledge sentence's content tokens.
// Tokens outside the vocabulary and the aligned token itself are skipped.
template <typename T>
double aligned_distance(const nn::Tensor<T>& table, const corpus::Vocabulary& vocab,
                        const std::vector<std::vector<std::string>>& utterances,
                        const std::vector<AlignmentRecord>& alignments, const corpus::KnowledgeBase& kb,
                        const corpus::StopwordList& stopwords) {
  std::map<KnowledgeId, std::vector<std::size_t>> content;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : alignments) {
    if (r.example_id >= utterances.size() || r.token_index >= utterances[r.example_id].size()) continue;
    const auto& tok = utterances[r.example_id][r.token_index];
    if (!vocab.contains(tok)) continue;
    const auto a = static_cast<std::size_t>(vocab.id(tok));
    auto it = content.find(r.knowledge_id);
    if (it == content.end()) {
      std::vector<std::size_t> ids;
      for (const auto& t : corpus::tokenize(kb[r.knowledge_id].text))
        if (!stopwords.masks(t) && vocab.contains(t)) ids.push_back(static_cast<std::size_t>(vocab.id(t)));
      it = content.emplace(r.knowledge_id, std::move(ids)).first;
    }
    for (std::size_t b : it->second) {
      if (b == a) continue;
      sum += row_distance(table, a, b);
      ++n;
    }
  }
  if (n == 0) fail("InvariantError", "no aligned token has in-vocabulary knowledge content");
  return sum / double(n);
}

}  // namespace lexki::analysis
