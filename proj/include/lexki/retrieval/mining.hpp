#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lexki/corpus/alignment.hpp"
#include "lexki/corpus/dialog.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/retrieval/index.hpp"
#include "lexki/retrieval/weak_supervision.hpp"

namespace lexki::retrieval {

struct MineOptions {
  bool stopword_masking = true;
  bool exact_matching = true;
};

// Alignments for one tokenized utterance. Per token: masked tokens get no
// record, a single-token title match wins next, otherwise the index argmax.
template <typename T>
std::vector<corpus::AlignmentRecord> mine(const RetrieverModel<T>& m, const KnowledgeIndex& index,
                                          const corpus::KnowledgeBase& kb, const corpus::StopwordList& stopwords,
                                          const std::vector<std::string>& tokens, const MineOptions& opt,
                                          std::size_t example_id = 0) {
  if (index.size() != kb.size())
    fail("InvariantError", "index has ", index.size(), " rows for a knowledge base of ", kb.size());
  std::vector<corpus::AlignmentRecord> out;
  const std::size_t window = m.config().max_len;
  for (std::size_t start = 0; start < tokens.size(); start += window) {
    const std::size_t end = std::min(tokens.size(), start + window);
    std::vector<std::size_t> need;
    for (std::size_t i = start; i < end; ++i) {
      if (opt.stopword_masking && stopwords.masks(tokens[i])) continue;
      if (opt.exact_matching) {
        if (auto k = kb.match_title(tokens[i])) {
          out.push_back({example_id, i, *k, std::nullopt, corpus::AlignmentSource::ExactMatch});
          continue;
        }
      }
      need.push_back(i);
    }
    if (need.empty()) continue;
    const std::vector<std::string> chunk(tokens.begin() + start, tokens.begin() + end);
    Tape<T> tape(false);
    const auto q = m.queries(tape, {m.encode_tokens(chunk)}, RunMode::inference());
    std::vector<float> row(q.cols());
    for (std::size_t i : need) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<float>(q.value()(i - start, j));
      const Hit h = argmax_inner(index, row);
      out.push_back({example_id, i, h.id, h.score, corpus::AlignmentSource::Retrieved});
    }
  }
  std::sort(out.begin(), out.end(), corpus::position_less);
  return out;
}

// Mines every utterance of a corpus, sharded over threads; records come back
// ordered by (example id, token index) whatever the thread count.
template <typename T>
std::vector<corpus::AlignmentRecord> mine_corpus(const RetrieverModel<T>& m, const KnowledgeIndex& index,
                                                 const corpus::KnowledgeBase& kb,
                                                 const corpus::StopwordList& stopwords,
                                                 const std::vector<corpus::DialogExample>& examples,
                                                 const MineOptions& opt, std::size_t threads = 1) {
  threads = std::max<std::size_t>(1, std::min(threads, std::max<std::size_t>(1, examples.size())));
  std::vector<std::vector<corpus::AlignmentRecord>> shards(threads);
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t t) {
    try {
      for (std::size_t e = t; e < examples.size(); e += threads) {
        auto recs = mine(m, index, kb, stopwords, corpus::tokenize(examples[e].utterance), opt, e);
        shards[t].insert(shards[t].end(), recs.begin(), recs.end());
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<corpus::AlignmentRecord> out;
  for (auto& s : shards) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end(), corpus::position_less);
  return out;
}

struct CoverageStats {
  double per_token = 0.0;     // mean distinct knowledge ids per token type
  double per_sentence = 0.0;  // mean distinct knowledge ids per aligned utterance
  std::size_t token_types = 0;
  std::size_t sentences = 0;
};

// `utterances[e]` holds the tokens of example e that records index into.
inline CoverageStats coverage_stats(const std::vector<corpus::AlignmentRecord>& records,
                                    const std::vector<std::vector<std::string>>& utterances) {
  if (records.empty()) fail("InvariantError", "coverage statistics need at least one alignment");
  std::map<std::string, std::set<KnowledgeId>> per_type;
  std::map<std::size_t, std::set<KnowledgeId>> per_sentence;
  for (const auto& r : records) {
    if (r.example_id >= utterances.size() || r.token_index >= utterances[r.example_id].size())
      fail("InvariantError", "alignment (", r.example_id, ", ", r.token_index, ") outside the corpus");
    per_type[utterances[r.example_id][r.token_index]].insert(r.knowledge_id);
    per_sentence[r.example_id].insert(r.knowledge_id);
  }
  CoverageStats s;
  s.token_types = per_type.size();
  s.sentences = per_sentence.size();
  for (const auto& [t, ks] : per_type) s.per_token += double(ks.size());
  for (const auto& [e, ks] : per_sentence) s.per_sentence += double(ks.size());
  s.per_token /= double(s.token_types);
  s.per_sentence /= double(s.sentences);
  return s;
}

// Weak pairs whose surface token occurs in exactly one article's first sentence.
inline std::vector<WeakPair> unique_token_pairs(const std::vector<WeakPair>& pairs, const corpus::KnowledgeBase& kb) {
  std::map<std::string, std::set<KnowledgeId>> owners;
  std::vector<std::vector<std::string>> toks(kb.size());
  for (std::size_t a = 0; a < kb.size(); ++a) {
    toks[a] = corpus::tokenize(kb[a].text);
    for (const auto& t : toks[a]) owners[t].insert(a);
  }
  std::vector<WeakPair> out;
  for (const auto& p : pairs) {
    if (p.token_index < toks[p.article].size() && owners[toks[p.article][p.token_index]].size() == 1) out.push_back(p);
  }
  return out;
}

// Fraction of pairs whose mined knowledge id, with the article's first
// sentence as context, is the pair's positive. Masking is not applied.
template <typename T>
double top1_accuracy(const RetrieverModel<T>& m, const KnowledgeIndex& index, const corpus::KnowledgeBase& kb,
                     const std::vector<WeakPair>& pairs, bool exact_matching) {
  if (pairs.empty()) fail("InvariantError", "accuracy over an empty pair list");
  const corpus::StopwordList none(std::vector<std::string>{});
  const MineOptions opt{false, exact_matching};
  std::map<KnowledgeId, std::map<std::size_t, KnowledgeId>> mined;
  std::size_t hits = 0;
  for (const auto& p : pairs) {
    auto it = mined.find(p.article);
    if (it == mined.end()) {
      it = mined.emplace(p.article, std::map<std::size_t, KnowledgeId>{}).first;
      for (const auto& r : mine(m, index, kb, none, corpus::tokenize(kb[p.article].text), opt))
        it->second[r.token_index] = r.knowledge_id;
    }
    auto hit = it->second.find(p.token_index);
    if (hit != it->second.end() && hit->second == p.positive) ++hits;
  }
  return double(hits) / double(pairs.size());
}

}  // namespace lexki::retrieval
