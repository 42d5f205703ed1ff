#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lexki/corpus/vocabulary.hpp"
#include "lexki/nn/ops.hpp"
#include "lexki/nn/rng.hpp"
#include "lexki/nn/tape.hpp"

// Transformer pieces shared by the dialog model, the KI knowledge encoder and
// the retriever. Sequences of a batch are packed row-wise without padding;
// Segments records where each sequence starts.
namespace lexki::model {

using corpus::TokenId;
using nn::Parameter;
using nn::ParameterStore;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

struct Segments {
  std::vector<std::size_t> offset;
  std::vector<std::size_t> length;

  static Segments from_lengths(const std::vector<std::size_t>& lengths) {
    Segments s;
    std::size_t off = 0;
    for (std::size_t n : lengths) {
      s.offset.push_back(off);
      s.length.push_back(n);
      off += n;
    }
    return s;
  }

  template <typename Seqs>
  static Segments of(const Seqs& seqs) {
    std::vector<std::size_t> lengths;
    for (const auto& s : seqs) lengths.push_back(s.size());
    return from_lengths(lengths);
  }

  std::size_t count() const noexcept { return offset.size(); }
  std::size_t total() const noexcept { return offset.empty() ? 0 : offset.back() + length.back(); }
};

// Dropout is applied only when train is set and an rng is supplied.
struct RunMode {
  bool train = false;
  double dropout = 0.0;
  Rng* rng = nullptr;

  static RunMode inference() { return {}; }
};

template <typename T>
Var<T> maybe_dropout(Var<T> x, const RunMode& mode) {
  if (!mode.train || mode.rng == nullptr || mode.dropout <= 0.0) return x;
  return nn::dropout(x, mode.dropout, *mode.rng);
}

template <typename T>
Tensor<T> normal_tensor(std::size_t r, std::size_t c, double stddev, Rng& rng) {
  Tensor<T> t(r, c);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * stddev);
  return t;
}

template <typename T>
Tensor<T> uniform_tensor(std::size_t r, std::size_t c, double bound, Rng& rng) {
  Tensor<T> t(r, c);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> sinusoid_table(std::size_t max_len, std::size_t d) {
  Tensor<T> t(max_len, d);
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      t(pos, i) = static_cast<T>(std::sin(static_cast<double>(pos) * freq));
      if (i + 1 < d) t(pos, i + 1) = static_cast<T>(std::cos(static_cast<double>(pos) * freq));
    }
  }
  return t;
}

template <typename T>
struct Linear {
  Parameter<T>* weight = nullptr;  // in x out
  Parameter<T>* bias = nullptr;    // 1 x out

  static Linear create(ParameterStore<T>& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Linear l;
    l.weight = store.add(name + ".w", uniform_tensor<T>(in, out, bound, rng));
    l.bias = store.add(name + ".b", Tensor<T>(1, out));
    return l;
  }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& tape = *x.tape;
    return nn::add(nn::matmul(x, tape.parameter(*weight)), tape.parameter(*bias));
  }
};

template <typename T>
struct LayerNorm {
  Parameter<T>* gain = nullptr;
  Parameter<T>* bias = nullptr;

  static LayerNorm create(ParameterStore<T>& store, const std::string& name, std::size_t d) {
    LayerNorm ln;
    ln.gain = store.add(name + ".g", Tensor<T>(1, d, T{1}));
    ln.bias = store.add(name + ".b", Tensor<T>(1, d));
    return ln;
  }

  Var<T> operator()(Var<T> x) const {
    Tape<T>& tape = *x.tape;
    return nn::layer_norm(x, tape.parameter(*gain), tape.parameter(*bias));
  }
};

template <typename T>
struct MultiHeadAttention {
  Linear<T> q, k, v, o;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParameterStore<T>& store, const std::string& name, std::size_t d,
                                   std::size_t heads, Rng& rng) {
    MultiHeadAttention a;
    a.q = Linear<T>::create(store, name + ".q", d, d, rng);
    a.k = Linear<T>::create(store, name + ".k", d, d, rng);
    a.v = Linear<T>::create(store, name + ".v", d, d, rng);
    a.o = Linear<T>::create(store, name + ".o", d, d, rng);
    a.heads = heads;
    return a;
  }

  // Query segment s attends to memory segment kv_of[s] (identity when empty).
  Var<T> operator()(Var<T> xq, const Segments& sq, Var<T> xkv, const Segments& skv, bool causal,
                    const std::vector<std::size_t>& kv_of = {}) const {
    const Var<T> Q = q(xq);
    const Var<T> K = k(xkv);
    const Var<T> V = v(xkv);
    const std::size_t d = Q.cols();
    const std::size_t dh = d / heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Var<T>> segs;
    segs.reserve(sq.count());
    for (std::size_t s = 0; s < sq.count(); ++s) {
      const std::size_t ks = kv_of.empty() ? s : kv_of[s];
      std::vector<Var<T>> per_head;
      per_head.reserve(heads);
      for (std::size_t h = 0; h < heads; ++h) {
        const Var<T> qh = nn::slice(Q, sq.offset[s], sq.length[s], h * dh, dh);
        const Var<T> kh = nn::slice(K, skv.offset[ks], skv.length[ks], h * dh, dh);
        const Var<T> vh = nn::slice(V, skv.offset[ks], skv.length[ks], h * dh, dh);
        const Var<T> scores = nn::scale(nn::matmul(qh, kh, false, true), inv_sqrt);
        per_head.push_back(nn::matmul(nn::softmax(scores, causal), vh));
      }
      segs.push_back(heads == 1 ? per_head[0] : nn::concat_cols<T>(per_head));
    }
    return o(segs.size() == 1 ? segs[0] : nn::concat_rows<T>(segs));
  }
};

template <typename T>
struct FeedForward {
  Linear<T> in, out;

  static FeedForward create(ParameterStore<T>& store, const std::string& name, std::size_t d,
                            std::size_t d_ffn, Rng& rng) {
    return {Linear<T>::create(store, name + ".in", d, d_ffn, rng),
            Linear<T>::create(store, name + ".out", d_ffn, d, rng)};
  }

  Var<T> operator()(Var<T> x, const RunMode& mode) const {
    return out(maybe_dropout(nn::relu(in(x)), mode));
  }
};

// Pre-norm encoder block.
template <typename T>
struct EncoderLayer {
  LayerNorm<T> ln_attn, ln_ffn;
  MultiHeadAttention<T> attn;
  FeedForward<T> ffn;

  static EncoderLayer create(ParameterStore<T>& store, const std::string& name, std::size_t d,
                             std::size_t heads, std::size_t d_ffn, Rng& rng) {
    EncoderLayer l;
    l.ln_attn = LayerNorm<T>::create(store, name + ".ln_attn", d);
    l.attn = MultiHeadAttention<T>::create(store, name + ".attn", d, heads, rng);
    l.ln_ffn = LayerNorm<T>::create(store, name + ".ln_ffn", d);
    l.ffn = FeedForward<T>::create(store, name + ".ffn", d, d_ffn, rng);
    return l;
  }

  Var<T> operator()(Var<T> x, const Segments& segs, const RunMode& mode) const {
    const Var<T> h = ln_attn(x);
    x = nn::add(x, maybe_dropout(attn(h, segs, h, segs, false), mode));
    return nn::add(x, maybe_dropout(ffn(ln_ffn(x), mode), mode));
  }
};

// Pre-norm decoder block: causal self-attention, cross-attention, FFN.
template <typename T>
struct DecoderLayer {
  LayerNorm<T> ln_self, ln_cross, ln_ffn;
  MultiHeadAttention<T> self_attn, cross_attn;
  FeedForward<T> ffn;

  static DecoderLayer create(ParameterStore<T>& store, const std::string& name, std::size_t d,
                             std::size_t heads, std::size_t d_ffn, Rng& rng) {
    DecoderLayer l;
    l.ln_self = LayerNorm<T>::create(store, name + ".ln_self", d);
    l.self_attn = MultiHeadAttention<T>::create(store, name + ".self_attn", d, heads, rng);
    l.ln_cross = LayerNorm<T>::create(store, name + ".ln_cross", d);
    l.cross_attn = MultiHeadAttention<T>::create(store, name + ".cross_attn", d, heads, rng);
    l.ln_ffn = LayerNorm<T>::create(store, name + ".ln_ffn", d);
    l.ffn = FeedForward<T>::create(store, name + ".ffn", d, d_ffn, rng);
    return l;
  }

  Var<T> operator()(Var<T> x, const Segments& segs, Var<T> memory, const Segments& mem_segs,
                    const std::vector<std::size_t>& kv_of, const RunMode& mode) const {
    const Var<T> h = ln_self(x);
    x = nn::add(x, maybe_dropout(self_attn(h, segs, h, segs, true), mode));
    x = nn::add(x, maybe_dropout(cross_attn(ln_cross(x), segs, memory, mem_segs, false, kv_of), mode));
    return nn::add(x, maybe_dropout(ffn(ln_ffn(x), mode), mode));
  }
};

// Token embedding (optionally scaled, optionally plus sinusoidal positions)
// followed by encoder blocks and a final layer norm. The embedding table may
// belong to another module's store.
template <typename T>
struct EncoderStack {
  Parameter<T>* embedding = nullptr;
  bool use_positions = true;
  std::size_t max_len = 0;
  std::vector<EncoderLayer<T>> layers;
  LayerNorm<T> final_ln;
  bool has_final_ln = false;

  static EncoderStack create(ParameterStore<T>& store, const std::string& name,
                             Parameter<T>* embedding, std::size_t d, std::size_t n_layers,
                             std::size_t heads, std::size_t d_ffn, std::size_t max_len,
                             bool use_positions, Rng& rng) {
    EncoderStack e;
    e.embedding = embedding;
    e.use_positions = use_positions;
    e.max_len = max_len;
    for (std::size_t i = 0; i < n_layers; ++i)
      e.layers.push_back(EncoderLayer<T>::create(store, name + "." + std::to_string(i), d, heads, d_ffn, rng));
    if (n_layers > 0) {
      e.final_ln = LayerNorm<T>::create(store, name + ".ln_out", d);
      e.has_final_ln = true;
    }
    return e;
  }

  // Scaled token embeddings plus positions for every packed sequence.
  static Var<T> embed(Tape<T>& tape, Parameter<T>& table, const std::vector<std::vector<TokenId>>& seqs,
                      bool use_positions, std::size_t max_len) {
    const std::size_t d = table.value.cols();
    std::vector<std::size_t> ids;
    for (const auto& s : seqs) {
      if (s.size() > max_len) fail("TooLong", "sequence of ", s.size(), " tokens exceeds max_len ", max_len);
      if (s.empty()) fail("InvariantError", "empty sequence");
      for (TokenId t : s) {
        if (t < 0 || static_cast<std::size_t>(t) >= table.value.rows())
          fail("InvariantError", "token id ", t, " outside embedding table");
        ids.push_back(static_cast<std::size_t>(t));
      }
    }
    Var<T> x = nn::scale(nn::embedding(tape.parameter(table), std::span<const std::size_t>(ids)),
                         static_cast<T>(std::sqrt(static_cast<double>(d))));
    if (!use_positions) return x;
    static thread_local std::vector<std::pair<std::size_t, Tensor<T>>> cache;
    const Tensor<T>* table_pe = nullptr;
    for (const auto& [dim, t] : cache)
      if (dim == d && t.rows() >= max_len) table_pe = &t;
    if (!table_pe) {
      cache.emplace_back(d, sinusoid_table<T>(max_len, d));
      table_pe = &cache.back().second;
    }
    Tensor<T> pe(ids.size(), d);
    std::size_t row = 0;
    for (const auto& s : seqs)
      for (std::size_t p = 0; p < s.size(); ++p, ++row)
        std::copy_n(table_pe->data() + p * d, d, pe.data() + row * d);
    return nn::add(x, tape.constant(std::move(pe)));
  }

  Var<T> operator()(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs,
                    const RunMode& mode) const {
    const Segments segs = Segments::of(seqs);
    Var<T> x = maybe_dropout(embed(tape, *embedding, seqs, use_positions, max_len), mode);
    for (const auto& layer : layers) x = layer(x, segs, mode);
    return has_final_ln ? final_ln(x) : x;
  }
};

}  // namespace lexki::model
