#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/retrieval/retriever.hpp"

namespace lexki::retrieval {

// Projected, normalized knowledge embeddings; row id = knowledge id.
struct KnowledgeIndex {
  Tensor<float> rows;

  std::size_t size() const noexcept { return rows.rows(); }
  std::size_t dim() const noexcept { return rows.cols(); }
};

template <typename T>
KnowledgeIndex build_index(const RetrieverModel<T>& m, const corpus::KnowledgeBase& kb, std::size_t batch = 64) {
  KnowledgeIndex index{Tensor<float>(kb.size(), m.config().d_ki)};
  for (std::size_t b = 0; b < kb.size(); b += batch) {
    std::vector<std::vector<TokenId>> seqs;
    for (std::size_t k = b; k < std::min(b + batch, kb.size()); ++k) {
      auto ids = m.encode_tokens(corpus::tokenize(kb[k].text));
      if (ids.empty()) fail("InvariantError", "knowledge item ", k, " has no tokens");
      seqs.push_back(std::move(ids));
    }
    Tape<T> tape(false);
    const auto v = m.knowledge(tape, seqs, RunMode::inference());
    for (std::size_t r = 0; r < seqs.size(); ++r)
      for (std::size_t j = 0; j < index.dim(); ++j) index.rows(b + r, j) = static_cast<float>(v.value()(r, j));
  }
  return index;
}

struct Hit {
  KnowledgeId id = 0;
  double score = 0.0;
};

// Exact maximum inner product over all rows; ties go to the lowest id.
// Rows are scanned in cache-sized blocks; each dot product accumulates in
// double in column order.
inline Hit argmax_inner(const KnowledgeIndex& index, std::span<const float> q) {
  if (q.size() != index.dim()) fail("ShapeMismatch", "query of length ", q.size(), " against index of dim ", index.dim());
  if (index.size() == 0) fail("InvariantError", "empty knowledge index");
  constexpr std::size_t kBlock = 64;
  Hit best{0, -std::numeric_limits<double>::infinity()};
  double scores[kBlock];
  const float* data = index.rows.storage().data();
  const std::size_t d = index.dim();
  for (std::size_t b = 0; b < index.size(); b += kBlock) {
    const std::size_t n = std::min(kBlock, index.size() - b);
    for (std::size_t r = 0; r < n; ++r) {
      const float* row = data + (b + r) * d;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += double(row[j]) * double(q[j]);
      scores[r] = s;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (scores[r] > best.score) best = {b + r, scores[r]};
    }
  }
  return best;
}

}  // namespace lexki::retrieval
