#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lexki/model/seq2seq.hpp"

namespace lexki::model {

// Summed -log P(gold[r] | logits row r); one gold id per logits row.
template <typename T>
Var<T> token_nll_sum(Var<T> logits, std::span<const std::size_t> gold) {
  if (gold.size() != logits.rows())
    fail("ShapeMismatch", "logits have ", logits.rows(), " rows but ", gold.size(), " targets");
  return nn::scale(nn::sum_all(nn::pick(nn::log_softmax(logits), gold)), T{-1});
}

template <typename T>
struct NllTerms {
  Var<T> mean;      // mean over target tokens, differentiable
  double sum = 0.0; // summed negative log-likelihood
  std::size_t count = 0;
};

// Teacher-forced NLL of targets (response ids without <bos>/<eos>) given an
// encoded batch; every response contributes |Y| + 1 predictions.
template <typename T>
NllTerms<T> nll_terms(const Seq2SeqModel<T>& model, Tape<T>& tape,
                      const typename Seq2SeqModel<T>::Encoded& memory,
                      const std::vector<std::vector<TokenId>>& targets, const RunMode& mode) {
  std::vector<std::vector<TokenId>> inputs;
  std::vector<std::size_t> gold;
  inputs.reserve(targets.size());
  for (const auto& y : targets) {
    if (y.size() + 1 > model.config().max_len) {
      fail("TooLong", "response of ", y.size(), " tokens exceeds max_len ", model.config().max_len);
    }
    inputs.push_back(decoder_input(y));
    for (TokenId t : decoder_output(y)) gold.push_back(static_cast<std::size_t>(t));
  }
  const Var<T> logits = model.decode(tape, memory, inputs, {}, mode);
  const Var<T> total = token_nll_sum(logits, std::span<const std::size_t>(gold));
  NllTerms<T> out;
  out.count = gold.size();
  out.sum = static_cast<double>(total.value()[0]);
  out.mean = nn::scale(total, static_cast<T>(1.0 / static_cast<double>(gold.size())));
  return out;
}

// Mean per-token NLL of a single (X, Y) pair.
template <typename T>
Var<T> nll_loss(const Seq2SeqModel<T>& model, Tape<T>& tape, const std::vector<TokenId>& x,
                const std::vector<TokenId>& y, const RunMode& mode = RunMode::inference()) {
  const auto memory = model.encode(tape, {x}, mode);
  return nll_terms(model, tape, memory, {y}, mode).mean;
}

struct SourceTarget {
  std::vector<TokenId> source;
  std::vector<TokenId> target;
};

// Summed NLL and token count over a corpus, evaluated in inference mode in
// chunks of roughly batch_tokens tokens.
template <typename T>
std::pair<double, std::size_t> corpus_nll(const Seq2SeqModel<T>& model,
                                          const std::vector<SourceTarget>& pairs,
                                          std::size_t batch_tokens = 1024) {
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    std::vector<std::vector<TokenId>> sources, targets;
    std::size_t tokens = 0;
    while (i < pairs.size() &&
           (sources.empty() || tokens + pairs[i].source.size() + pairs[i].target.size() + 1 <= batch_tokens)) {
      tokens += pairs[i].source.size() + pairs[i].target.size() + 1;
      sources.push_back(pairs[i].source);
      targets.push_back(pairs[i].target);
      ++i;
    }
    Tape<T> tape(false);
    const auto memory = model.encode(tape, sources, RunMode::inference());
    const auto terms = nll_terms(model, tape, memory, targets, RunMode::inference());
    sum += terms.sum;
    count += terms.count;
  }
  return {sum, count};
}

inline double perplexity_from(double nll_sum, std::size_t count) {
  if (count == 0) fail("EmptyCorpus", "perplexity needs at least one predicted token");
  return std::exp(nll_sum / static_cast<double>(count));
}

// exp(total NLL / total predicted tokens), <eos> included.
template <typename T>
double perplexity(const Seq2SeqModel<T>& model, const std::vector<SourceTarget>& pairs) {
  if (pairs.empty()) fail("EmptyCorpus", "perplexity needs at least one example");
  const auto [sum, count] = corpus_nll(model, pairs);
  return perplexity_from(sum, count);
}

}  // namespace lexki::model
