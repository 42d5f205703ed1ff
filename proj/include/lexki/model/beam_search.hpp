#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "lexki/model/config.hpp"
#include "lexki/model/seq2seq.hpp"

namespace lexki::model {

struct BeamOptions {
  std::size_t beam_size = 5;
  std::size_t max_len = 32;  // decoding steps
  double alpha = 0.0;
  std::size_t min_len = 0;
  TokenId eos = corpus::kEos;
  std::vector<TokenId> banned;  // never emitted
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // without <eos>
  double score = 0.0;           // cumulative log-probability
  std::size_t length = 0;       // scored tokens, <eos> included when present
  bool ended = false;

  double normalized(double alpha) const {
    if (alpha <= 0.0 || length == 0) return score;
    return score / std::pow(static_cast<double>(length), alpha);
  }
};

// Scores the next token for each live prefix: returns one row of
// log-probabilities (vocab-sized) per prefix.
using StepFn = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<TokenId>>&)>;

// Each step expands every live beam and keeps the top beam_size candidates
// by cumulative log-probability (ties: lower token id, then lower beam
// index). Selected candidates ending in <eos> retire; the rest stay live.
inline Hypothesis beam_search(const StepFn& step, const BeamOptions& opt) {
  if (opt.beam_size < 1) fail("ConfigError", "beam_size must be >= 1");
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  struct Candidate {
    double score;
    TokenId token;
    std::size_t beam;
  };
  for (std::size_t t = 0; t < opt.max_len && !live.empty(); ++t) {
    std::vector<std::vector<TokenId>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& h : live) prefixes.push_back(h.tokens);
    const auto logp = step(prefixes);
    std::vector<Candidate> cands;
    for (std::size_t b = 0; b < live.size(); ++b) {
      for (std::size_t v = 0; v < logp[b].size(); ++v) {
        const auto tok = static_cast<TokenId>(v);
        if (std::find(opt.banned.begin(), opt.banned.end(), tok) != opt.banned.end()) continue;
        if (tok == opt.eos && t < opt.min_len) continue;
        if (!std::isfinite(logp[b][v])) continue;
        cands.push_back({live[b].score + logp[b][v], tok, b});
      }
    }
    const std::size_t keep = std::min(opt.beam_size, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.beam < b.beam;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      Hypothesis h{live[c.beam].tokens, c.score, t + 1, false};
      if (c.token == opt.eos) {
        h.ended = true;
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    // Without length normalization scores only fall, so a finished
    // hypothesis at least as good as every live beam cannot be overtaken.
    if (opt.alpha <= 0.0 && !finished.empty() && !live.empty()) {
      double best_done = -std::numeric_limits<double>::infinity();
      for (const auto& h : finished) best_done = std::max(best_done, h.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.score);
      if (best_done >= best_live) break;
    }
  }
  if (finished.empty()) finished = std::move(live);
  if (finished.empty()) return Hypothesis{};
  return *std::min_element(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const double na = a.normalized(opt.alpha), nb = b.normalized(opt.alpha);
    if (na != nb) return na > nb;
    return a.tokens < b.tokens;
  });
}

// Decodes a response for source x. Only the encoder/decoder parameters are
// read. When trace is given, every executed op (name and output shape) is
// appended to it.
template <typename T>
std::vector<TokenId> generate(const Seq2SeqModel<T>& model, const std::vector<TokenId>& x,
                              const DecodeParams& params, std::vector<std::string>* trace = nullptr) {
  params.validate();
  const ModelConfig& cfg = model.config();
  if (x.size() > cfg.max_len) fail("TooLong", "source of ", x.size(), " tokens exceeds max_len ", cfg.max_len);
  Tape<T> enc_tape(false);
  enc_tape.set_tracing(trace != nullptr);
  const auto memory = model.encode(enc_tape, {x}, RunMode::inference());
  if (trace) trace->insert(trace->end(), enc_tape.trace().begin(), enc_tape.trace().end());
  BeamOptions opt;
  opt.beam_size = params.beam_size;
  opt.max_len = params.max_decode_len ? std::min(params.max_decode_len, cfg.max_len - 1) : cfg.max_len - 1;
  opt.alpha = params.alpha;
  opt.min_len = params.min_len;
  opt.banned = {corpus::kPad, corpus::kBos, corpus::kUnk};
  const StepFn step = [&](const std::vector<std::vector<TokenId>>& prefixes) {
    // Decoder ops share the tape that holds the encoder memory.
    Tape<T>& tape = enc_tape;
    const std::size_t mark = tape.trace().size();
    std::vector<std::vector<TokenId>> inputs;
    for (const auto& p : prefixes) inputs.push_back(decoder_input(p));
    const std::vector<std::size_t> kv_of(inputs.size(), 0);
    const Var<T> logits = model.decode(tape, memory, inputs, kv_of, RunMode::inference());
    const Tensor<T>& L = logits.value();
    std::vector<std::vector<double>> out;
    std::size_t row = 0;
    for (const auto& in : inputs) {
      row += in.size();
      const std::size_t r = row - 1;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t v = 0; v < L.cols(); ++v) mx = std::max(mx, static_cast<double>(L(r, v)));
      double sum = 0.0;
      for (std::size_t v = 0; v < L.cols(); ++v) sum += std::exp(static_cast<double>(L(r, v)) - mx);
      const double lse = mx + std::log(sum);
      std::vector<double> lp(L.cols());
      for (std::size_t v = 0; v < L.cols(); ++v) lp[v] = static_cast<double>(L(r, v)) - lse;
      out.push_back(std::move(lp));
    }
    if (trace) trace->insert(trace->end(), tape.trace().begin() + static_cast<std::ptrdiff_t>(mark), tape.trace().end());
    return out;
  };
  return beam_search(step, opt).tokens;
}

}  // namespace lexki::model
