#pragma once

#include <cstddef>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lexki/corpus/tokenizer.hpp"
#include "lexki/corpus/vocabulary.hpp"
#include "lexki/ki/ki_head.hpp"
#include "lexki/model/checkpoint.hpp"

namespace lexki::retrieval {

using corpus::KnowledgeId;
using corpus::TokenId;
using model::RunMode;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

struct RetrieverConfig {
  std::size_t d_model = 32;
  std::size_t n_layers = 1;  // context encoder depth
  std::size_t n_heads = 2;
  std::size_t d_ffn = 64;
  std::size_t max_len = 32;
  std::size_t d_ki = 64;
  std::size_t knowledge_layers = 1;
  bool shared_projection = false;
  double margin = 0.5;
  std::size_t negatives = 8;  // per positive
  double dropout = 0.0;

  model::ModelConfig model_config(std::size_t vocab_size) const {
    model::ModelConfig c;
    c.vocab_size = vocab_size;
    c.d_model = d_model;
    c.n_layers = n_layers;
    c.n_heads = n_heads;
    c.d_ffn = d_ffn;
    c.max_len = max_len;
    c.dropout = dropout;
    return c;
  }

  ki::KiConfig head_config() const {
    ki::KiConfig k;
    k.margin = margin;
    k.negatives = negatives;
    k.d_ki = d_ki;
    k.encoder_layers = knowledge_layers;
    k.shared_projection = shared_projection;
    return k;
  }

  void validate() const {
    if (!(margin > 0.0)) fail("ConfigError", "retriever margin must be > 0, got ", margin);
    if (d_ki == 0) fail("ConfigError", "retriever d_ki must be positive");
    if (negatives == 0) fail("ConfigError", "retriever negatives must be >= 1");
    if (max_len == 0) fail("ConfigError", "retriever max_len must be positive");
  }
};

// Dual encoder: a context encoder yielding per-token rows h_i, and a
// knowledge encoder with mean pooling, both projected onto the unit sphere.
// Both encoders read one embedding table owned by the retriever.
template <typename T = float>
class RetrieverModel {
 public:
  RetrieverModel(const RetrieverConfig& cfg, corpus::Vocabulary vocab, Rng rng)
      : cfg_(cfg), vocab_(std::move(vocab)) {
    cfg_.validate();
    const model::ModelConfig mc = cfg_.model_config(vocab_.size());
    mc.validate();
    Rng base = rng.split(0);
    embedding_ = params_.add("ret/embed", model::normal_tensor<T>(vocab_.size(), cfg_.d_model,
                                                                   1.0 / std::sqrt(double(cfg_.d_model)), base));
    context_ = model::EncoderStack<T>::create(params_, "ret/ctx", embedding_, cfg_.d_model, cfg_.n_layers,
                                              cfg_.n_heads, cfg_.d_ffn, cfg_.max_len, true, base);
    head_.emplace(cfg_.head_config(), embedding_, mc, rng.split(1), "ret");
  }

  RetrieverModel(const RetrieverModel&) = delete;
  RetrieverModel& operator=(const RetrieverModel&) = delete;
  RetrieverModel(RetrieverModel&&) noexcept = default;
  RetrieverModel& operator=(RetrieverModel&&) noexcept = default;

  const RetrieverConfig& config() const noexcept { return cfg_; }
  const corpus::Vocabulary& vocab() const noexcept { return vocab_; }
  const ki::KiHead<T>& head() const noexcept { return *head_; }
  nn::ParameterStore<T>& encoder_params() noexcept { return params_; }
  const nn::ParameterStore<T>& encoder_params() const noexcept { return params_; }
  nn::ParameterStore<T>& head_params() noexcept { return head_->params(); }
  const nn::ParameterStore<T>& head_params() const noexcept { return head_->params(); }

  std::vector<nn::Parameter<T>*> all_params() const {
    auto out = params_.all();
    for (auto* p : head_->params().all()) out.push_back(p);
    return out;
  }

  RunMode train_mode(Rng& rng) const { return RunMode{true, cfg_.dropout, &rng}; }

  // Lowercased word tokens to ids, truncated to max_len.
  std::vector<TokenId> encode_tokens(const std::vector<std::string>& tokens) const {
    auto ids = vocab_.encode(tokens);
    if (ids.size() > cfg_.max_len) ids.resize(cfg_.max_len);
    return ids;
  }

  // Context encoder rows h_i for each packed sentence.
  Var<T> context(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs, const RunMode& mode) const {
    return context_(tape, seqs, mode);
  }

  // Projected token queries f(h_i), one row per token.
  Var<T> queries(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs, const RunMode& mode) const {
    return head_->project_tokens(context(tape, seqs, mode));
  }

  // Projected knowledge f(g(K)), one row per sequence.
  Var<T> knowledge(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs, const RunMode& mode) const {
    return head_->project_knowledge(head_->knowledge(tape, seqs, mode));
  }

 private:
  RetrieverConfig cfg_;
  corpus::Vocabulary vocab_;
  nn::ParameterStore<T> params_;
  nn::Parameter<T>* embedding_ = nullptr;
  model::EncoderStack<T> context_;
  std::optional<ki::KiHead<T>> head_;
};

// r(s_i | S, K) for one token of one sentence.
template <typename T>
double score(const RetrieverModel<T>& m, const std::vector<TokenId>& sentence, std::size_t i,
             const std::vector<TokenId>& knowledge) {
  if (i >= sentence.size()) fail("InvariantError", "token index ", i, " outside sentence of ", sentence.size());
  Tape<T> tape(false);
  const auto q = m.queries(tape, {sentence}, RunMode::inference());
  const auto k = m.knowledge(tape, {knowledge}, RunMode::inference());
  double s = 0.0;
  for (std::size_t j = 0; j < k.cols(); ++j) s += double(q.value()(i, j)) * double(k.value()(0, j));
  return s;
}

template <typename T>
model::CheckpointFile to_checkpoint(const RetrieverModel<T>& m) {
  const RetrieverConfig& c = m.config();
  model::CheckpointFile ck;
  ck.set("kind", "retriever");
  ck.set_num("d_model", c.d_model);
  ck.set_num("n_layers", c.n_layers);
  ck.set_num("n_heads", c.n_heads);
  ck.set_num("d_ffn", c.d_ffn);
  ck.set_num("max_len", c.max_len);
  ck.set_num("d_ki", c.d_ki);
  ck.set_num("knowledge_layers", c.knowledge_layers);
  ck.set("shared_projection", c.shared_projection ? "1" : "0");
  ck.set_num("margin", c.margin);
  ck.set_num("negatives", c.negatives);
  ck.set_num("dropout", c.dropout);
  ck.set_num("vocab_hash", m.vocab().hash());
  ck.set("vocab", corpus::join(m.vocab().tokens()));
  ck.add_params(m.encoder_params());
  ck.add_params(m.head_params());
  return ck;
}

template <typename T = float>
RetrieverModel<T> retriever_from_checkpoint(const model::CheckpointFile& ck) {
  if (!ck.has("kind") || ck.get("kind") != "retriever") fail("CheckpointError", "not a retriever checkpoint");
  RetrieverConfig c;
  c.d_model = ck.get_u64("d_model");
  c.n_layers = ck.get_u64("n_layers");
  c.n_heads = ck.get_u64("n_heads");
  c.d_ffn = ck.get_u64("d_ffn");
  c.max_len = ck.get_u64("max_len");
  c.d_ki = ck.get_u64("d_ki");
  c.knowledge_layers = ck.get_u64("knowledge_layers");
  c.shared_projection = ck.get("shared_projection") == "1";
  c.margin = ck.get_double("margin");
  c.negatives = ck.get_u64("negatives");
  c.dropout = ck.get_double("dropout");
  std::vector<std::string> tokens;
  std::istringstream in(ck.get("vocab"));
  for (std::string t; in >> t;) tokens.push_back(t);
  auto vocab = corpus::Vocabulary::from_tokens(tokens, "checkpoint vocab");
  if (vocab.hash() != ck.get_u64("vocab_hash")) fail("CheckpointError", "retriever vocabulary hash mismatch");
  RetrieverModel<T> m(c, std::move(vocab), Rng(0));
  if (ck.tensors.size() != m.encoder_params().size() + m.head_params().size())
    fail("CheckpointError", "retriever checkpoint holds ", ck.tensors.size(), " tensors, expected ",
         m.encoder_params().size() + m.head_params().size());
  ck.load_params(m.encoder_params());
  ck.load_params(m.head_params());
  return m;
}

template <typename T>
void save_retriever(const std::string& path, const RetrieverModel<T>& m) {
  to_checkpoint(m).save(path);
}

template <typename T = float>
RetrieverModel<T> load_retriever(const std::string& path) {
  return retriever_from_checkpoint<T>(model::CheckpointFile::load(path));
}

}  // namespace lexki::retrieval
