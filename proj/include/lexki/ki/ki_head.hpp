#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lexki/model/config.hpp"
#include "lexki/model/transformer.hpp"

namespace lexki::ki {

using corpus::TokenId;
using model::EncoderStack;
using model::Linear;
using model::RunMode;
using nn::Parameter;
using nn::ParameterStore;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

struct KiConfig {
  double lambda = 1.0;
  double margin = 0.5;
  std::size_t negatives = 1;       // per positive
  std::size_t d_ki = 64;
  std::size_t encoder_layers = 1;  // knowledge encoder depth
  bool encoder_positions = true;
  bool shared_projection = false;  // one map for both f1 and f2

  static KiConfig desk() { return {}; }
  static KiConfig paper() {
    KiConfig c;
    c.d_ki = 256;
    return c;
  }

  void validate() const {
    if (!(margin > 0.0)) fail("ConfigError", "margin must be > 0, got ", margin);
    if (!(lambda >= 0.0)) fail("ConfigError", "lambda must be >= 0, got ", lambda);
    if (negatives < 1) fail("ConfigError", "negatives per positive must be >= 1");
    if (d_ki == 0) fail("ConfigError", "d_ki must be positive");
  }
};

// Knowledge encoder g (transformer over knowledge tokens plus mean pooling)
// and the two projections f1 (token states) and f2 (pooled knowledge), both
// l2-normalized. The encoder reads the dialog model's embedding table; every
// other parameter lives in this head's store under the "ki/" prefix.
template <typename T>
class KiHead {
 public:
  KiHead(const KiConfig& cfg, Parameter<T>* embedding, const model::ModelConfig& mc, Rng rng,
         const std::string& prefix = "ki")
      : cfg_(cfg), max_len_(mc.max_len) {
    cfg_.validate();
    const std::size_t d = embedding->value.cols();
    encoder_ = EncoderStack<T>::create(params_, prefix + "/kenc", embedding, d, cfg_.encoder_layers, mc.n_heads,
                                       mc.d_ffn, mc.max_len, cfg_.encoder_positions, rng);
    if (cfg_.shared_projection) {
      f1_ = Linear<T>::create(params_, prefix + "/f", d, cfg_.d_ki, rng);
      f2_ = f1_;
    } else {
      f1_ = Linear<T>::create(params_, prefix + "/f1", d, cfg_.d_ki, rng);
      f2_ = Linear<T>::create(params_, prefix + "/f2", d, cfg_.d_ki, rng);
    }
  }

  KiHead(const KiHead&) = delete;
  KiHead& operator=(const KiHead&) = delete;
  KiHead(KiHead&&) noexcept = default;
  KiHead& operator=(KiHead&&) noexcept = default;

  const KiConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& params() noexcept { return params_; }
  const ParameterStore<T>& params() const noexcept { return params_; }
  std::size_t max_len() const noexcept { return max_len_; }
  bool shared_projection() const noexcept { return cfg_.shared_projection; }

  // Knowledge encoder output, packed rows.
  Var<T> knowledge_states(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs, const RunMode& mode) const {
    for (const auto& s : seqs) {
      if (s.size() > max_len_) fail("TooLong", "knowledge of ", s.size(), " tokens exceeds max_len ", max_len_);
    }
    return encoder_(tape, seqs, mode);
  }

  // g(K) for each sequence: one mean-pooled row per knowledge item.
  Var<T> knowledge(Tape<T>& tape, const std::vector<std::vector<TokenId>>& seqs, const RunMode& mode) const {
    return mean_pool(tape, knowledge_states(tape, seqs, mode), seqs);
  }

  Var<T> project_tokens(Var<T> h) const { return nn::l2_normalize(f1_(h)); }
  Var<T> project_knowledge(Var<T> g) const { return nn::l2_normalize(f2_(g)); }

 private:
  static Var<T> mean_pool(Tape<T>& tape, Var<T> states, const std::vector<std::vector<TokenId>>& seqs) {
    Tensor<T> pool(seqs.size(), states.rows());
    std::size_t off = 0;
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      const T w = static_cast<T>(1.0 / static_cast<double>(seqs[s].size()));
      for (std::size_t i = 0; i < seqs[s].size(); ++i) pool(s, off + i) = w;
      off += seqs[s].size();
    }
    return nn::matmul(tape.constant(std::move(pool)), states);
  }

  KiConfig cfg_;
  std::size_t max_len_ = 0;
  ParameterStore<T> params_;
  EncoderStack<T> encoder_;
  Linear<T> f1_, f2_;
};

// g(K) as a plain vector of length d_model.
template <typename T>
std::vector<T> encode_knowledge(const KiHead<T>& head, const std::vector<TokenId>& k) {
  if (k.empty()) fail("InvariantError", "cannot encode empty knowledge");
  Tape<T> tape(false);
  const auto& g = head.knowledge(tape, {k}, RunMode::inference()).value().storage();
  return std::vector<T>(g.begin(), g.end());
}

// s = f1(h)^T f2(g).
template <typename T>
T similarity(const KiHead<T>& head, std::span<const T> h, std::span<const T> g) {
  Tape<T> tape(false);
  const Var<T> u = head.project_tokens(tape.constant(Tensor<T>({1, h.size()}, std::vector<T>(h.begin(), h.end()))));
  const Var<T> v = head.project_knowledge(tape.constant(Tensor<T>({1, g.size()}, std::vector<T>(g.begin(), g.end()))));
  return nn::matmul(u, v, false, true).value().item();
}

// Inner product of two already projected vectors.
inline double dot_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail("ShapeMismatch", "similarity of vectors of length ", u.size(), " and ", v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

}  // namespace lexki::ki
