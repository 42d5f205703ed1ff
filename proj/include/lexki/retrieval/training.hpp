#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "lexki/ki/ki_loss.hpp"
#include "lexki/nn/optim.hpp"
#include "lexki/retrieval/retriever.hpp"
#include "lexki/retrieval/weak_supervision.hpp"

namespace lexki::retrieval {

struct RetrieverTrainConfig {
  std::size_t max_epochs = 80;
  std::size_t patience = 10;
  std::size_t batch_articles = 64;
  std::size_t max_steps = 0;  // 0: no step limit
  double heldout_fraction = 0.1;
  double token_dropout = 0.0;  // context tokens replaced by <unk> during training
  std::uint64_t seed = 1;
  nn::AdamConfig adam;
  nn::LrSchedule schedule{1e-7, 0.005, 100, nn::DecayMode::InverseLinear};

  void validate() const {
    if (batch_articles < 2) fail("ConfigError", "batch_articles must be >= 2");
    if (max_epochs == 0) fail("ConfigError", "max_epochs must be positive");
    if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0))
      fail("ConfigError", "heldout_fraction must be in [0, 1), got ", heldout_fraction);
    if (!(token_dropout >= 0.0 && token_dropout < 1.0))
      fail("ConfigError", "token_dropout must be in [0, 1), got ", token_dropout);
  }
};

struct RetrieverEpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;
  double heldout_loss = std::numeric_limits<double>::quiet_NaN();
  bool improved = false;
};

template <typename T>
struct RetrieverTrainResult {
  RetrieverModel<T> model;
  std::vector<RetrieverEpochLog> epochs;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_heldout_loss = std::numeric_limits<double>::infinity();
  std::vector<WeakPair> train_pairs;
  std::vector<WeakPair> heldout_pairs;
};

namespace detail {

enum RetrieverStream : std::uint64_t { kRetInit = 0, kRetShuffle = 1, kRetNegatives = 2, kRetDropout = 3,
                                       kRetSplit = 4, kRetTokenDrop = 5 };

// Pairs grouped by article, in article id order.
inline std::map<KnowledgeId, std::vector<std::size_t>> by_article(const std::vector<WeakPair>& pairs) {
  std::map<KnowledgeId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) out[pairs[i].article].push_back(i);
  return out;
}

// Mean hinge over one batch of articles; context and knowledge are both the
// article's first sentence. With token_drop, context tokens are replaced by
// <unk> at the given rate so that unseen words are resolved from context.
template <typename T>
ki::KiTerms<T> batch_loss(const RetrieverModel<T>& m, Tape<T>& tape, const std::vector<KnowledgeId>& articles,
                          const std::map<KnowledgeId, std::vector<std::size_t>>& groups,
                          const std::vector<WeakPair>& pairs, const ki::KnowledgeTokens& tokens, Rng& rng,
                          const RunMode& mode, double token_drop = 0.0, Rng* drop_rng = nullptr) {
  std::vector<std::vector<TokenId>> sentences;
  std::vector<ki::KiItem> items;
  std::size_t offset = 0;
  for (std::size_t b = 0; b < articles.size(); ++b) {
    const auto& s = tokens(articles[b]);
    sentences.push_back(s);
    if (drop_rng && token_drop > 0.0) {
      for (auto& t : sentences.back())
        if (drop_rng->uniform() < token_drop) t = corpus::kUnk;
    }
    for (std::size_t pi : groups.at(articles[b])) items.push_back({b, offset + pairs[pi].token_index, pairs[pi].positive});
    offset += s.size();
  }
  const Var<T> states = m.context(tape, sentences, mode);
  return ki::ki_loss(m.head(), tape, states, items, tokens, rng, mode);
}

}  // namespace detail

// Dual-encoder training on weak pairs with in-batch negatives from other
// articles and early stopping on the held-out pair loss.
template <typename T = float>
RetrieverTrainResult<T> train_retriever(const std::vector<WeakPair>& pairs, const corpus::KnowledgeBase& kb,
                                        const corpus::Vocabulary& vocab, const RetrieverConfig& cfg,
                                        const RetrieverTrainConfig& tcfg,
                                        const std::function<void(const RetrieverEpochLog&)>& on_epoch = {}) {
  tcfg.validate();
  const Rng root(tcfg.seed);
  RetrieverModel<T> model(cfg, vocab, root.split(detail::kRetInit));

  std::map<KnowledgeId, std::vector<TokenId>> sentence;
  std::vector<WeakPair> usable;
  for (const auto& p : pairs) {
    if (p.article >= kb.size() || p.positive >= kb.size())
      fail("InvariantError", "weak pair references article ", p.article, " outside the knowledge base");
    auto it = sentence.find(p.article);
    if (it == sentence.end())
      it = sentence.emplace(p.article, model.encode_tokens(corpus::tokenize(kb[p.article].text))).first;
    if (!sentence.count(p.positive))
      sentence.emplace(p.positive, model.encode_tokens(corpus::tokenize(kb[p.positive].text)));
    if (p.token_index < it->second.size()) usable.push_back(p);
  }
  if (detail::by_article(usable).size() < 2)
    fail("InsufficientData", "retriever training needs pairs from at least 2 articles");
  const ki::KnowledgeTokens tokens = [&](KnowledgeId k) -> const std::vector<TokenId>& { return sentence.at(k); };

  std::vector<std::size_t> idx(usable.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng split_rng = root.split(detail::kRetSplit);
  split_rng.shuffle(idx.begin(), idx.end());
  const auto n_held = static_cast<std::size_t>(tcfg.heldout_fraction * static_cast<double>(usable.size()));
  std::vector<WeakPair> train_pairs, held_pairs;
  for (std::size_t i = 0; i < idx.size(); ++i) (i < n_held ? held_pairs : train_pairs).push_back(usable[idx[i]]);
  auto pos_less = [](const WeakPair& a, const WeakPair& b) {
    return a.article != b.article ? a.article < b.article : a.token_index < b.token_index;
  };
  std::sort(train_pairs.begin(), train_pairs.end(), pos_less);
  std::sort(held_pairs.begin(), held_pairs.end(), pos_less);
  const auto train_groups = detail::by_article(train_pairs);
  const auto held_groups = detail::by_article(held_pairs);
  if (train_groups.size() < 2) fail("InsufficientData", "training split covers fewer than 2 articles");
  const bool early_stop = held_groups.size() >= 2;

  std::vector<KnowledgeId> held_articles;
  for (const auto& [a, v] : held_groups) held_articles.push_back(a);
  auto heldout_loss = [&](const RetrieverModel<T>& m, const std::vector<WeakPair>& held) {
    Rng neg = root.split(detail::kRetNegatives).split(1);
    double sum = 0.0;
    std::size_t terms = 0;
    for (std::size_t b = 0; b < held_articles.size(); b += tcfg.batch_articles) {
      const std::vector<KnowledgeId> batch(held_articles.begin() + b,
                                           held_articles.begin() + std::min(b + tcfg.batch_articles, held_articles.size()));
      Tape<T> tape(false);
      const auto r = detail::batch_loss(m, tape, batch, held_groups, held, tokens, neg, RunMode::inference());
      sum += double(r.loss.value().item()) * double(r.terms);
      terms += r.terms;
    }
    return terms ? sum / double(terms) : 0.0;
  };

  const auto params = model.all_params();
  nn::Adam<T> adam(tcfg.adam);
  Rng shuffle_rng = root.split(detail::kRetShuffle);
  Rng negative_rng = root.split(detail::kRetNegatives).split(0);
  Rng dropout_rng = root.split(detail::kRetDropout);
  Rng token_drop_rng = root.split(detail::kRetTokenDrop);
  const RunMode mode = model.train_mode(dropout_rng);

  RetrieverTrainResult<T> result{std::move(model), {}, 0, 0, std::numeric_limits<double>::infinity(),
                                 std::move(train_pairs), std::move(held_pairs)};
  std::vector<Tensor<T>> best;
  std::size_t since_best = 0;
  bool out_of_steps = false;
  std::vector<KnowledgeId> order;
  for (const auto& [a, v] : train_groups) order.push_back(a);

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs && !out_of_steps; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    RetrieverEpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < order.size(); b += tcfg.batch_articles) {
      if (tcfg.max_steps && result.steps >= tcfg.max_steps) {
        out_of_steps = true;
        break;
      }
      const std::vector<KnowledgeId> batch(order.begin() + b,
                                           order.begin() + std::min(b + tcfg.batch_articles, order.size()));
      if (batch.size() < 2) continue;
      Tape<T> tape(true);
      const auto r =
          detail::batch_loss(result.model, tape, batch, train_groups, result.train_pairs, tokens,
                                        negative_rng, mode, tcfg.token_dropout, &token_drop_rng);
      if (r.terms == 0) continue;
      ++result.steps;
      for (auto* p : params) p->zero_grad();
      tape.backward(r.loss);
      adam.step(params, tcfg.schedule.at(result.steps));
      log.train_loss += double(r.loss.value().item());
      ++log.steps;
    }
    if (log.steps == 0) break;
    log.train_loss /= double(log.steps);
    if (early_stop) {
      log.heldout_loss = heldout_loss(result.model, result.heldout_pairs);
      if (log.heldout_loss < result.best_heldout_loss) {
        result.best_heldout_loss = log.heldout_loss;
        result.best_epoch = epoch;
        log.improved = true;
        since_best = 0;
        best.clear();
        for (auto* p : params) best.push_back(p->value);
      } else {
        ++since_best;
      }
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (early_stop && since_best >= tcfg.patience) break;
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  } else if (!result.epochs.empty()) {
    result.best_epoch = result.epochs.back().epoch;
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

}  // namespace lexki::retrieval
