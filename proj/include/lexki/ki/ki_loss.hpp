#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/ki/ki_head.hpp"

namespace lexki::ki {

using corpus::KnowledgeId;

// One aligned utterance token inside a training batch.
struct KiItem {
  std::size_t utterance = 0;  // batch-local utterance index
  std::size_t row = 0;        // row of h_i in the packed encoder output
  KnowledgeId positive = 0;
};

struct KiTerm {
  std::size_t item = 0;
  KnowledgeId negative = 0;
};

struct NegativeDraw {
  std::vector<KiTerm> terms;
  std::size_t skipped = 0;  // items without any valid negative
};

// For every item, `per_positive` uniform draws from the batch's distinct
// knowledge ids, excluding ids aligned anywhere in the item's own utterance.
inline NegativeDraw sample_negatives(const std::vector<KiItem>& items, Rng& rng, std::size_t per_positive = 1) {
  std::set<KnowledgeId> pool;
  std::map<std::size_t, std::set<KnowledgeId>> own;
  for (const auto& it : items) {
    pool.insert(it.positive);
    own[it.utterance].insert(it.positive);
  }
  const std::vector<KnowledgeId> ids(pool.begin(), pool.end());
  std::map<std::size_t, std::vector<KnowledgeId>> candidates;
  for (const auto& [utt, mine] : own) {
    auto& c = candidates[utt];
    for (KnowledgeId k : ids)
      if (!mine.count(k)) c.push_back(k);
  }
  NegativeDraw out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& c = candidates[items[i].utterance];
    if (c.empty()) {
      ++out.skipped;
      continue;
    }
    for (std::size_t n = 0; n < per_positive; ++n) out.terms.push_back({i, c[rng.below(c.size())]});
  }
  return out;
}

inline double hinge(double margin, double s_pos, double s_neg) {
  return std::max(0.0, (margin - s_pos) + s_neg);
}

// Elementwise max(0, m - s+ + s-) over matching rows.
template <typename T>
Var<T> hinge(Var<T> s_pos, Var<T> s_neg, double margin) {
  return nn::relu(nn::add_scalar(nn::sub(s_neg, s_pos), static_cast<T>(margin)));
}

template <typename T>
struct KiTerms {
  Var<T> loss;  // mean hinge over sampled terms, 0 when none
  std::size_t terms = 0;
  std::size_t skipped = 0;
};

using KnowledgeTokens = std::function<const std::vector<TokenId>&(KnowledgeId)>;

// Hinge loss of the batch's aligned tokens against their knowledge, with
// negatives drawn from the batch. `states` holds the encoder rows h_i.
template <typename T>
KiTerms<T> ki_loss(const KiHead<T>& head, Tape<T>& tape, Var<T> states, const std::vector<KiItem>& items,
                   const KnowledgeTokens& knowledge_tokens, Rng& rng, const RunMode& mode) {
  const NegativeDraw draw = sample_negatives(items, rng, head.config().negatives);
  KiTerms<T> out;
  out.skipped = draw.skipped;
  out.terms = draw.terms.size();
  if (draw.terms.empty()) {
    out.loss = tape.constant(Tensor<T>(1, 1));
    return out;
  }
  std::vector<KnowledgeId> needed;
  for (const auto& t : draw.terms) {
    needed.push_back(items[t.item].positive);
    needed.push_back(t.negative);
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(needed.size());
  for (KnowledgeId k : needed) seqs.push_back(knowledge_tokens(k));
  auto col_of = [&](KnowledgeId k) {
    return static_cast<std::size_t>(std::lower_bound(needed.begin(), needed.end(), k) - needed.begin());
  };
  std::vector<std::size_t> rows, pos, neg;
  for (std::size_t i = 0; i < draw.terms.size(); ++i) {
    const auto& t = draw.terms[i];
    rows.push_back(items[t.item].row);
    pos.push_back(col_of(items[t.item].positive));
    neg.push_back(col_of(t.negative));
  }
  const Var<T> u = head.project_tokens(nn::gather_rows(states, std::span<const std::size_t>(rows)));
  const Var<T> v = head.project_knowledge(head.knowledge(tape, seqs, mode));
  const Var<T> s = nn::matmul(u, v, false, true);
  const Var<T> h = hinge(nn::pick(s, std::span<const std::size_t>(pos)), nn::pick(s, std::span<const std::size_t>(neg)),
                         head.config().margin);
  out.loss = nn::mean_all(h);
  return out;
}

inline double joint_loss(double nll, double ki, double lambda) {
  if (!(lambda >= 0.0)) fail("ConfigError", "lambda must be >= 0, got ", lambda);
  return lambda == 0.0 ? nll : nll + lambda * ki;
}

template <typename T>
Var<T> joint_loss(Var<T> nll, Var<T> ki, double lambda) {
  if (!(lambda >= 0.0)) fail("ConfigError", "lambda must be >= 0, got ", lambda);
  if (lambda == 0.0) return nll;
  return nn::add(nll, nn::scale(ki, static_cast<T>(lambda)));
}

}  // namespace lexki::ki
