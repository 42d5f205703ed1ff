#pragma once

#include <optional>
#include <string>
#include <utility>

#include "lexki/ki/ki_head.hpp"
#include "lexki/model/checkpoint.hpp"
#include "lexki/model/seq2seq.hpp"

namespace lexki::model {

// A dialog model plus, for KI-trained runs, the head used only in training.
template <typename T>
struct DialogModel {
  Seq2SeqModel<T> seq2seq;
  std::optional<ki::KiHead<T>> ki;
  std::size_t max_context_turns = 2;
  std::uint64_t vocab_hash = 0;
};

template <typename T>
CheckpointFile to_checkpoint(const DialogModel<T>& m) {
  const ModelConfig& c = m.seq2seq.config();
  CheckpointFile ck;
  ck.set("kind", "dialog");
  ck.set_num("vocab_size", c.vocab_size);
  ck.set_num("d_model", c.d_model);
  ck.set_num("n_layers", c.n_layers);
  ck.set_num("n_heads", c.n_heads);
  ck.set_num("d_ffn", c.d_ffn);
  ck.set_num("max_len", c.max_len);
  ck.set_num("dropout", c.dropout);
  ck.set_num("max_context_turns", m.max_context_turns);
  ck.set_num("vocab_hash", m.vocab_hash);
  ck.set("ki", m.ki ? "1" : "0");
  if (m.ki) {
    const ki::KiConfig& k = m.ki->config();
    ck.set_num("ki.lambda", k.lambda);
    ck.set_num("ki.margin", k.margin);
    ck.set_num("ki.negatives", k.negatives);
    ck.set_num("ki.d_ki", k.d_ki);
    ck.set_num("ki.encoder_layers", k.encoder_layers);
    ck.set("ki.encoder_positions", k.encoder_positions ? "1" : "0");
    ck.set("ki.shared_projection", k.shared_projection ? "1" : "0");
  }
  ck.add_params(m.seq2seq.params());
  if (m.ki) ck.add_params(m.ki->params());
  return ck;
}

inline ModelConfig model_config_from(const CheckpointFile& ck) {
  ModelConfig c;
  c.vocab_size = ck.get_u64("vocab_size");
  c.d_model = ck.get_u64("d_model");
  c.n_layers = ck.get_u64("n_layers");
  c.n_heads = ck.get_u64("n_heads");
  c.d_ffn = ck.get_u64("d_ffn");
  c.max_len = ck.get_u64("max_len");
  c.dropout = ck.get_double("dropout");
  return c;
}

template <typename T = float>
DialogModel<T> dialog_from_checkpoint(const CheckpointFile& ck) {
  if (!ck.has("kind") || ck.get("kind") != "dialog") fail("CheckpointError", "not a dialog checkpoint");
  const ModelConfig c = model_config_from(ck);
  DialogModel<T> m{Seq2SeqModel<T>(c, Rng(0)), std::nullopt, ck.get_u64("max_context_turns"),
                   ck.get_u64("vocab_hash")};
  ck.load_params(m.seq2seq.params());
  if (ck.get("ki") == "1") {
    ki::KiConfig k;
    k.lambda = ck.get_double("ki.lambda");
    k.margin = ck.get_double("ki.margin");
    k.negatives = ck.get_u64("ki.negatives");
    k.d_ki = ck.get_u64("ki.d_ki");
    k.encoder_layers = ck.get_u64("ki.encoder_layers");
    k.encoder_positions = ck.get("ki.encoder_positions") == "1";
    k.shared_projection = ck.get("ki.shared_projection") == "1";
    m.ki.emplace(k, &m.seq2seq.embedding(), c, Rng(0));
    ck.load_params(m.ki->params());
  }
  const std::size_t expected = m.seq2seq.params().size() + (m.ki ? m.ki->params().size() : 0);
  if (ck.tensors.size() != expected) {
    fail("CheckpointError", "checkpoint holds ", ck.tensors.size(), " tensors, model expects ", expected);
  }
  return m;
}

template <typename T>
void save_dialog(const DialogModel<T>& m, const std::string& path) {
  to_checkpoint(m).save(path);
}

template <typename T = float>
DialogModel<T> load_dialog(const std::string& path) {
  return dialog_from_checkpoint<T>(CheckpointFile::load(path));
}

}  // namespace lexki::model
