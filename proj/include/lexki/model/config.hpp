#pragma once

#include <cstddef>
#include <cstdint>

#include "lexki/error.hpp"

namespace lexki::model {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ffn = 128;
  std::size_t max_len = 64;
  double dropout = 0.1;

  static ModelConfig desk() { return {}; }

  // Transformer dimensions of the full-scale setup; not meant for a laptop.
  static ModelConfig paper() {
    ModelConfig c;
    c.d_model = 512;
    c.n_layers = 6;
    c.n_heads = 4;
    c.d_ffn = 1024;
    c.max_len = 256;
    return c;
  }

  void validate() const {
    if (vocab_size < 5) fail("ConfigError", "vocab_size must be >= 5, got ", vocab_size);
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
      fail("ConfigError", "d_model (", d_model, ") must be a positive multiple of n_heads (", n_heads, ")");
    if (max_len < 2) fail("ConfigError", "max_len must be >= 2, got ", max_len);
    if (d_ffn == 0) fail("ConfigError", "d_ffn must be positive");
    if (dropout < 0.0 || dropout >= 1.0) fail("ConfigError", "dropout must be in [0, 1), got ", dropout);
  }

  bool operator==(const ModelConfig&) const = default;
};

struct DecodeParams {
  std::size_t beam_size = 5;
  std::size_t max_decode_len = 0;  // 0 means max_len - 1
  double alpha = 0.0;              // length-normalization exponent
  std::size_t min_len = 0;         // eos is blocked before this many tokens

  void validate() const {
    if (beam_size < 1) fail("ConfigError", "beam_size must be >= 1");
    if (alpha < 0.0) fail("ConfigError", "alpha must be >= 0");
  }
};

}  // namespace lexki::model
