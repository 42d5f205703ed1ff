#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lexki/corpus/dialog.hpp"
#include "lexki/corpus/tokenizer.hpp"
#include "lexki/corpus/vocabulary.hpp"
#include "lexki/model/config.hpp"
#include "lexki/model/transformer.hpp"

namespace lexki::model {

// Encoder-decoder transformer with one embedding table shared by the
// encoder input, the decoder input and the output projection.
template <typename T>
class Seq2SeqModel {
 public:
  struct Encoded {
    Var<T> states;  // packed rows, one per source token
    Segments segs;
  };

  Seq2SeqModel(const ModelConfig& cfg, Rng rng) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.d_model;
    embedding_ = params_.add("embed", normal_tensor<T>(cfg_.vocab_size, d, 1.0 / std::sqrt(double(d)), rng));
    encoder_ = EncoderStack<T>::create(params_, "enc", embedding_, d, cfg_.n_layers, cfg_.n_heads,
                                       cfg_.d_ffn, cfg_.max_len, true, rng);
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
      decoder_.push_back(DecoderLayer<T>::create(params_, "dec." + std::to_string(i), d, cfg_.n_heads,
                                                 cfg_.d_ffn, rng));
    }
    dec_ln_ = LayerNorm<T>::create(params_, "dec.ln_out", d);
  }

  Seq2SeqModel(const Seq2SeqModel&) = delete;
  Seq2SeqModel& operator=(const Seq2SeqModel&) = delete;
  Seq2SeqModel(Seq2SeqModel&&) noexcept = default;
  Seq2SeqModel& operator=(Seq2SeqModel&&) noexcept = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& params() noexcept { return params_; }
  const ParameterStore<T>& params() const noexcept { return params_; }
  Parameter<T>& embedding() const noexcept { return *embedding_; }

  RunMode train_mode(Rng& rng) const { return RunMode{true, cfg_.dropout, &rng}; }

  Encoded encode(Tape<T>& tape, const std::vector<std::vector<TokenId>>& sources,
                 const RunMode& mode) const {
    return {encoder_(tape, sources, mode), Segments::of(sources)};
  }

  // Logits (packed rows x vocab) for teacher-forced decoder inputs. Input
  // sequence s reads encoder segment kv_of[s] (identity when kv_of is empty).
  Var<T> decode(Tape<T>& tape, const Encoded& memory, const std::vector<std::vector<TokenId>>& inputs,
                const std::vector<std::size_t>& kv_of, const RunMode& mode) const {
    const Segments segs = Segments::of(inputs);
    Var<T> x = maybe_dropout(EncoderStack<T>::embed(tape, *embedding_, inputs, true, cfg_.max_len), mode);
    for (const auto& layer : decoder_) x = layer(x, segs, memory.states, memory.segs, kv_of, mode);
    x = dec_ln_(x);
    return nn::matmul(x, tape.parameter(*embedding_), false, true);
  }

  // H(X): one contextualized row per input token.
  Tensor<T> encode(const std::vector<TokenId>& x) const {
    if (x.empty()) fail("InvariantError", "cannot encode an empty sequence");
    Tape<T> tape(false);
    return encode(tape, {x}, RunMode::inference()).states.value();
  }

 private:
  ModelConfig cfg_;
  ParameterStore<T> params_;
  Parameter<T>* embedding_ = nullptr;
  EncoderStack<T> encoder_;
  std::vector<DecoderLayer<T>> decoder_;
  LayerNorm<T> dec_ln_;
};

// A dialog example mapped to ids. The source is the context turns followed
// by the utterance, with <eos> between turns; utterance token i sits at
// source row utterance_offset + i.
struct EncodedExample {
  std::size_t example_id = 0;
  std::vector<TokenId> source;
  std::size_t utterance_offset = 0;
  std::size_t utterance_length = 0;
  std::vector<TokenId> target;  // response without <bos>/<eos>
};

// Oldest context turns are dropped first when the source would exceed
// max_len; an over-long utterance or response is cut at the end.
inline EncodedExample encode_example(const corpus::DialogExample& ex, const corpus::Vocabulary& vocab,
                                     std::size_t max_len, std::size_t max_context_turns,
                                     std::size_t example_id = 0) {
  EncodedExample out;
  out.example_id = example_id;
  std::vector<TokenId> utt = vocab.encode(corpus::tokenize(ex.utterance));
  if (utt.size() > max_len) utt.resize(max_len);
  std::vector<std::vector<TokenId>> turns;
  const std::size_t first = ex.context.size() > max_context_turns ? ex.context.size() - max_context_turns : 0;
  for (std::size_t i = first; i < ex.context.size(); ++i) {
    auto ids = vocab.encode(corpus::tokenize(ex.context[i]));
    if (!ids.empty()) turns.push_back(std::move(ids));
  }
  std::size_t budget = max_len - utt.size();
  std::size_t keep_from = turns.size();
  std::size_t used = 0;
  while (keep_from > 0 && used + turns[keep_from - 1].size() + 1 <= budget) {
    used += turns[keep_from - 1].size() + 1;
    --keep_from;
  }
  for (std::size_t i = keep_from; i < turns.size(); ++i) {
    out.source.insert(out.source.end(), turns[i].begin(), turns[i].end());
    out.source.push_back(corpus::kEos);
  }
  out.utterance_offset = out.source.size();
  out.utterance_length = utt.size();
  out.source.insert(out.source.end(), utt.begin(), utt.end());
  out.target = vocab.encode(corpus::tokenize(ex.response));
  if (out.target.size() + 1 > max_len) out.target.resize(max_len - 1);
  return out;
}

inline std::vector<TokenId> decoder_input(const std::vector<TokenId>& target) {
  std::vector<TokenId> in{corpus::kBos};
  in.insert(in.end(), target.begin(), target.end());
  return in;
}

inline std::vector<TokenId> decoder_output(const std::vector<TokenId>& target) {
  std::vector<TokenId> out(target);
  out.push_back(corpus::kEos);
  return out;
}

}  // namespace lexki::model
