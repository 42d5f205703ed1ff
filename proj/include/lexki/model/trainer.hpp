#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "lexki/corpus/alignment.hpp"
#include "lexki/corpus/dialog.hpp"
#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/vocabulary.hpp"
#include "lexki/ki/ki_loss.hpp"
#include "lexki/model/dialog_model.hpp"
#include "lexki/model/loss.hpp"
#include "lexki/nn/optim.hpp"

namespace lexki::model {

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t patience = 10;        // epochs without validation improvement
  std::size_t batch_tokens = 512;   // source + target tokens per batch
  std::size_t max_steps = 0;        // 0: no step limit
  std::size_t max_context_turns = 2;
  std::uint64_t seed = 1;
  nn::AdamConfig adam;
  nn::LrSchedule schedule{1e-7, 0.005, 200, nn::DecayMode::InverseLinear};

  static TrainConfig desk() { return {}; }
  static TrainConfig paper() {
    TrainConfig c;
    c.batch_tokens = 4096;
    c.schedule.warmup_steps = 4000;
    return c;
  }

  void validate() const {
    if (batch_tokens == 0) fail("ConfigError", "batch_tokens must be positive");
    if (max_epochs == 0) fail("ConfigError", "max_epochs must be positive");
    if (schedule.warmup_steps == 0) fail("ConfigError", "warmup_steps must be positive");
  }
};

// Alignments index examples of the training corpus by position.
struct KiInputs {
  const corpus::KnowledgeBase* kb = nullptr;
  const std::vector<corpus::AlignmentRecord>* alignments = nullptr;
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double nll = 0.0;
  double ki = 0.0;
  double loss = 0.0;  // nll + lambda * ki
  double lr = 0.0;
  std::size_t ki_terms = 0;
  std::size_t ki_skipped = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double first_nll = 0.0;  // NLL of the epoch's first batch, before its update
  double train_nll = 0.0;  // mean of step NLLs
  double train_ki = 0.0;
  double valid_nll = std::numeric_limits<double>::quiet_NaN();  // per token
  bool improved = false;
};

template <typename T>
struct TrainResult {
  DialogModel<T> model;  // parameters of the best validation epoch
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid_nll = std::numeric_limits<double>::infinity();
  std::size_t skipped_negatives = 0;
};

// Greedy packing of `order` into batches of at most `budget` tokens; an
// example larger than the budget forms its own batch.
inline std::vector<std::vector<std::size_t>> pack_batches(const std::vector<EncodedExample>& data,
                                                          const std::vector<std::size_t>& order,
                                                          std::size_t budget) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> cur;
  std::size_t tokens = 0;
  for (std::size_t i : order) {
    const std::size_t n = data[i].source.size() + data[i].target.size() + 1;
    if (!cur.empty() && tokens + n > budget) {
      batches.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
    cur.push_back(i);
    tokens += n;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

// Random streams derived from the seed. Each consumer owns its stream, so
// e.g. enabling KI leaves the dialog model's initialization untouched.
enum Stream : std::uint64_t { kInitStream = 0, kKiInitStream = 1, kDropoutStream = 2, kShuffleStream = 3,
                              kNegativeStream = 4 };

template <typename T = float>
TrainResult<T> train_dialog(const std::vector<corpus::DialogExample>& train,
                            const std::vector<corpus::DialogExample>& valid, const corpus::Vocabulary& vocab,
                            const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const std::optional<KiInputs>& ki_inputs = std::nullopt,
                            const ki::KiConfig& kcfg = ki::KiConfig{0.0},
                            const std::function<void(const EpochLog&)>& on_epoch = {}) {
  tcfg.validate();
  kcfg.validate();
  if (train.empty()) fail("EmptyCorpus", "training corpus is empty");
  const bool use_ki = kcfg.lambda > 0.0;
  if (use_ki && (!ki_inputs || !ki_inputs->kb || !ki_inputs->alignments)) {
    fail("MissingAlignments", "lambda = ", kcfg.lambda, " requires alignments and a knowledge base");
  }
  ModelConfig cfg = mcfg;
  cfg.vocab_size = vocab.size();
  const Rng root(tcfg.seed);
  DialogModel<T> dm{Seq2SeqModel<T>(cfg, root.split(kInitStream)), std::nullopt, tcfg.max_context_turns,
                    vocab.hash()};
  if (use_ki) dm.ki.emplace(kcfg, &dm.seq2seq.embedding(), cfg, root.split(kKiInitStream));

  std::vector<EncodedExample> data;
  data.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    data.push_back(encode_example(train[i], vocab, cfg.max_len, tcfg.max_context_turns, i));
  std::vector<SourceTarget> valid_pairs;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    auto e = encode_example(valid[i], vocab, cfg.max_len, tcfg.max_context_turns, i);
    valid_pairs.push_back({std::move(e.source), std::move(e.target)});
  }

  std::vector<std::vector<corpus::AlignmentRecord>> aligned;
  std::map<corpus::KnowledgeId, std::vector<TokenId>> ktokens;
  if (use_ki) {
    aligned = corpus::group_by_example(*ki_inputs->alignments, train.size());
    for (const auto& r : *ki_inputs->alignments) {
      if (r.knowledge_id >= ki_inputs->kb->size())
        fail("InvariantError", "alignment references knowledge id ", r.knowledge_id, " outside the knowledge base");
    }
  }
  const ki::KnowledgeTokens knowledge_tokens = [&](corpus::KnowledgeId k) -> const std::vector<TokenId>& {
    auto it = ktokens.find(k);
    if (it != ktokens.end()) return it->second;
    auto ids = vocab.encode(corpus::tokenize((*ki_inputs->kb)[k].text));
    if (ids.size() > cfg.max_len) ids.resize(cfg.max_len);
    return ktokens.emplace(k, std::move(ids)).first->second;
  };

  std::vector<Parameter<T>*> params = dm.seq2seq.params().all();
  if (dm.ki) {
    auto extra = dm.ki->params().all();
    params.insert(params.end(), extra.begin(), extra.end());
  }
  nn::Adam<T> adam(tcfg.adam);
  Rng dropout_rng = root.split(kDropoutStream);
  Rng shuffle_rng = root.split(kShuffleStream);
  Rng negative_rng = root.split(kNegativeStream);
  const RunMode mode = dm.seq2seq.train_mode(dropout_rng);

  TrainResult<T> result{std::move(dm), {}, {}, 0, std::numeric_limits<double>::infinity(), 0};
  DialogModel<T>& m = result.model;
  std::vector<Tensor<T>> best;
  std::size_t since_best = 0;
  std::size_t step = 0;
  bool out_of_steps = false;

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs && !out_of_steps; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    EpochLog elog;
    elog.epoch = epoch;
    for (const auto& batch : pack_batches(data, order, tcfg.batch_tokens)) {
      if (tcfg.max_steps && step >= tcfg.max_steps) {
        out_of_steps = true;
        break;
      }
      ++step;
      Tape<T> tape(true);
      std::vector<std::vector<TokenId>> sources, targets;
      for (std::size_t i : batch) {
        sources.push_back(data[i].source);
        targets.push_back(data[i].target);
      }
      const auto memory = m.seq2seq.encode(tape, sources, mode);
      const NllTerms<T> nll = nll_terms(m.seq2seq, tape, memory, targets, mode);
      StepLog slog;
      slog.step = step;
      slog.epoch = epoch;
      slog.nll = static_cast<double>(nll.mean.value().item());
      Var<T> loss = nll.mean;
      if (use_ki) {
        std::vector<ki::KiItem> items;
        for (std::size_t u = 0; u < batch.size(); ++u) {
          const EncodedExample& ex = data[batch[u]];
          for (const auto& r : aligned[ex.example_id]) {
            if (r.token_index >= ex.utterance_length) continue;
            items.push_back({u, memory.segs.offset[u] + ex.utterance_offset + r.token_index, r.knowledge_id});
          }
        }
        const auto terms = ki::ki_loss(*m.ki, tape, memory.states, items, knowledge_tokens, negative_rng, mode);
        slog.ki = static_cast<double>(terms.loss.value().item());
        slog.ki_terms = terms.terms;
        slog.ki_skipped = terms.skipped;
        result.skipped_negatives += terms.skipped;
        loss = ki::joint_loss(nll.mean, terms.loss, kcfg.lambda);
      }
      slog.loss = static_cast<double>(loss.value().item());
      for (auto* p : params) p->zero_grad();
      tape.backward(loss);
      slog.lr = tcfg.schedule.at(step);
      adam.step(params, slog.lr);
      if (elog.steps == 0) elog.first_nll = slog.nll;
      elog.train_nll += slog.nll;
      elog.train_ki += slog.ki;
      ++elog.steps;
      result.steps.push_back(slog);
    }
    if (elog.steps == 0) break;
    elog.train_nll /= static_cast<double>(elog.steps);
    elog.train_ki /= static_cast<double>(elog.steps);
    if (!valid_pairs.empty()) {
      const auto [sum, count] = corpus_nll(m.seq2seq, valid_pairs, std::max<std::size_t>(tcfg.batch_tokens, 1024));
      elog.valid_nll = sum / static_cast<double>(count);
      if (elog.valid_nll < result.best_valid_nll) {
        result.best_valid_nll = elog.valid_nll;
        result.best_epoch = epoch;
        elog.improved = true;
        since_best = 0;
        best.clear();
        for (auto* p : params) best.push_back(p->value);
      } else {
        ++since_best;
      }
    }
    result.epochs.push_back(elog);
    if (on_epoch) on_epoch(elog);
    if (!valid_pairs.empty() && since_best >= tcfg.patience) break;
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  } else if (!result.epochs.empty()) {
    result.best_epoch = result.epochs.back().epoch;
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

}  // namespace lexki::model
