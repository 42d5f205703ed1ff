#pragma once

#include <cstddef>
#include <vector>

#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/corpus/tokenizer.hpp"

namespace lexki::retrieval {

// One content token of an article's first sentence, aligned to that article.
struct WeakPair {
  corpus::KnowledgeId article = 0;
  std::size_t token_index = 0;
  corpus::KnowledgeId positive = 0;

  bool operator==(const WeakPair&) const = default;
};

inline std::vector<WeakPair> build_weak_supervision(const corpus::KnowledgeBase& kb,
                                                    const corpus::StopwordList& stopwords) {
  if (kb.size() == 0) fail("EmptyCorpus", "knowledge base is empty");
  std::vector<WeakPair> pairs;
  for (std::size_t a = 0; a < kb.size(); ++a) {
    const auto tokens = corpus::tokenize(kb[a].text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!stopwords.masks(tokens[i])) pairs.push_back({kb[a].id, i, kb[a].id});
    }
  }
  return pairs;
}

}  // namespace lexki::retrieval
