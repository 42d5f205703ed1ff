#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lexki/error.hpp"
#include "lexki/ki/ki_head.hpp"
#include "lexki/model/config.hpp"
#include "lexki/model/trainer.hpp"
#include "lexki/retrieval/mining.hpp"
#include "lexki/retrieval/training.hpp"

namespace lexki::cli {

// Everything a pipeline stage reads, addressable as dotted keys
// ("model.d_model", "ki.lambda", "paths.kb", ...).
struct RunConfig {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t vocab_max = 30000;
  std::size_t chat_turns = 2;
  model::ModelConfig model = model::ModelConfig::desk();
  model::TrainConfig train = model::TrainConfig::desk();
  ki::KiConfig ki = ki::KiConfig::desk();
  std::string variant = "token_level";
  retrieval::RetrieverConfig retriever;
  retrieval::RetrieverTrainConfig retriever_train;
  model::DecodeParams decode;
  retrieval::MineOptions mine;
  std::map<std::string, std::string> paths;

  static RunConfig desk() { return {}; }

  // Full-scale dimensions; documented for completeness, far too slow on a laptop.
  static RunConfig paper() {
    RunConfig c;
    c.preset = "paper";
    c.model = model::ModelConfig::paper();
    c.train = model::TrainConfig::paper();
    c.ki = ki::KiConfig::paper();
    c.retriever.d_model = 768;
    c.retriever.n_layers = 12;
    c.retriever.n_heads = 12;
    c.retriever.d_ffn = 3072;
    c.retriever.max_len = 256;
    c.retriever.d_ki = 256;
    c.retriever.knowledge_layers = 12;
    return c;
  }

  static RunConfig from_preset(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "paper") return paper();
    fail("ConfigError", "unknown preset '", name, "' (expected desk or paper)");
  }

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open config file '", path, "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      const auto key_end = line.find('=');
      const std::string lhs = trim(line.substr(0, key_end));
      if (key_end == std::string::npos) {
        if (!lhs.empty()) fail("ConfigError", path, ":", lineno, ": expected 'key = value'");
        continue;
      }
      try {
        set(lhs, trim(line.substr(key_end + 1)));
      } catch (const Error& e) {
        fail("ConfigError", path, ":", lineno, ": ", e.what());
      }
    }
  }

  std::string dump() const {
    std::string out;
    for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
    return out;
  }

  // FNV-1a of the canonical dump.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  // The model's vocab_size comes from the data, so it is not checked here.
  void validate() const {
    model::ModelConfig m = model;
    m.vocab_size = std::max<std::size_t>(m.vocab_size, 5);
    m.validate();
    train.validate();
    ki.validate();
    retriever.validate();
    retriever_train.validate();
    decode.validate();
    if (threads == 0) fail("ConfigError", "threads must be >= 1");
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }
};

namespace detail {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename V>
V parse_value(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  V v{};
  if constexpr (std::is_same_v<V, bool>) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    fail("ConfigError", key, ": expected true or false, got '", s, "'");
  } else if constexpr (std::is_same_v<V, std::string>) {
    return s;
  } else {
    if (std::is_unsigned_v<V> && !s.empty() && s[0] == '-') fail("ConfigError", key, ": must be non-negative");
    if (!(in >> v) || !(in >> std::ws).eof()) fail("ConfigError", key, ": cannot parse '", s, "'");
  }
  return v;
}

template <typename V>
std::string show(const V& v) {
  if constexpr (std::is_same_v<V, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<V, std::string>) {
    return v;
  } else {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }
}

template <typename V>
Field field(std::string key, std::function<V&(RunConfig&)> ref) {
  return {[key, ref](RunConfig& c, const std::string& s) { ref(c) = parse_value<V>(key, s); },
          [ref](const RunConfig& c) { return show(ref(const_cast<RunConfig&>(c))); }};
}

inline const std::vector<std::string>& path_keys() {
  static const std::vector<std::string> k{"articles", "kb",    "corpus", "valid",     "test",
                                          "alignments", "retriever", "model", "stopwords", "lexicon", "out"};
  return k;
}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
#define LEXKI_FIELD(name, type, expr) t[name] = field<type>(name, [](RunConfig& c) -> type& { return expr; })
    LEXKI_FIELD("seed", std::uint64_t, c.seed);
    LEXKI_FIELD("threads", std::size_t, c.threads);
    LEXKI_FIELD("vocab_max", std::size_t, c.vocab_max);
    LEXKI_FIELD("chat.turns", std::size_t, c.chat_turns);
    LEXKI_FIELD("model.d_model", std::size_t, c.model.d_model);
    LEXKI_FIELD("model.n_layers", std::size_t, c.model.n_layers);
    LEXKI_FIELD("model.n_heads", std::size_t, c.model.n_heads);
    LEXKI_FIELD("model.d_ffn", std::size_t, c.model.d_ffn);
    LEXKI_FIELD("model.max_len", std::size_t, c.model.max_len);
    LEXKI_FIELD("model.dropout", double, c.model.dropout);
    LEXKI_FIELD("train.max_epochs", std::size_t, c.train.max_epochs);
    LEXKI_FIELD("train.patience", std::size_t, c.train.patience);
    LEXKI_FIELD("train.batch_tokens", std::size_t, c.train.batch_tokens);
    LEXKI_FIELD("train.max_steps", std::size_t, c.train.max_steps);
    LEXKI_FIELD("train.max_context_turns", std::size_t, c.train.max_context_turns);
    LEXKI_FIELD("train.lr", double, c.train.schedule.peak);
    LEXKI_FIELD("train.lr_floor", double, c.train.schedule.floor);
    LEXKI_FIELD("train.warmup", std::uint64_t, c.train.schedule.warmup_steps);
    LEXKI_FIELD("ki.lambda", double, c.ki.lambda);
    LEXKI_FIELD("ki.margin", double, c.ki.margin);
    LEXKI_FIELD("ki.negatives", std::size_t, c.ki.negatives);
    LEXKI_FIELD("ki.d_ki", std::size_t, c.ki.d_ki);
    LEXKI_FIELD("ki.encoder_layers", std::size_t, c.ki.encoder_layers);
    LEXKI_FIELD("ki.encoder_positions", bool, c.ki.encoder_positions);
    LEXKI_FIELD("ki.shared_projection", bool, c.ki.shared_projection);
    LEXKI_FIELD("ki.variant", std::string, c.variant);
    LEXKI_FIELD("retriever.d_model", std::size_t, c.retriever.d_model);
    LEXKI_FIELD("retriever.n_layers", std::size_t, c.retriever.n_layers);
    LEXKI_FIELD("retriever.n_heads", std::size_t, c.retriever.n_heads);
    LEXKI_FIELD("retriever.d_ffn", std::size_t, c.retriever.d_ffn);
    LEXKI_FIELD("retriever.max_len", std::size_t, c.retriever.max_len);
    LEXKI_FIELD("retriever.d_ki", std::size_t, c.retriever.d_ki);
    LEXKI_FIELD("retriever.knowledge_layers", std::size_t, c.retriever.knowledge_layers);
    LEXKI_FIELD("retriever.shared_projection", bool, c.retriever.shared_projection);
    LEXKI_FIELD("retriever.margin", double, c.retriever.margin);
    LEXKI_FIELD("retriever.negatives", std::size_t, c.retriever.negatives);
    LEXKI_FIELD("retriever.dropout", double, c.retriever.dropout);
    LEXKI_FIELD("retriever_train.max_epochs", std::size_t, c.retriever_train.max_epochs);
    LEXKI_FIELD("retriever_train.patience", std::size_t, c.retriever_train.patience);
    LEXKI_FIELD("retriever_train.batch_articles", std::size_t, c.retriever_train.batch_articles);
    LEXKI_FIELD("retriever_train.max_steps", std::size_t, c.retriever_train.max_steps);
    LEXKI_FIELD("retriever_train.heldout_fraction", double, c.retriever_train.heldout_fraction);
    LEXKI_FIELD("retriever_train.token_dropout", double, c.retriever_train.token_dropout);
    LEXKI_FIELD("retriever_train.lr", double, c.retriever_train.schedule.peak);
    LEXKI_FIELD("retriever_train.warmup", std::uint64_t, c.retriever_train.schedule.warmup_steps);
    LEXKI_FIELD("decode.beam_size", std::size_t, c.decode.beam_size);
    LEXKI_FIELD("decode.max_decode_len", std::size_t, c.decode.max_decode_len);
    LEXKI_FIELD("decode.alpha", double, c.decode.alpha);
    LEXKI_FIELD("decode.min_len", std::size_t, c.decode.min_len);
    LEXKI_FIELD("mine.stopword_masking", bool, c.mine.stopword_masking);
    LEXKI_FIELD("mine.exact_matching", bool, c.mine.exact_matching);
#undef LEXKI_FIELD
    t["train.decay"] = {[](RunConfig& c, const std::string& s) { c.train.schedule.decay = nn::parse_decay_mode(s); },
                        [](const RunConfig& c) { return std::string(nn::decay_mode_name(c.train.schedule.decay)); }};
    for (const auto& p : path_keys()) {
      t["paths." + p] = {[p](RunConfig& c, const std::string& s) { c.paths[p] = s; },
                         [p](const RunConfig& c) {
                           auto it = c.paths.find(p);
                           return it == c.paths.end() ? std::string() : it->second;
                         }};
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    auto paths_copy = paths;
    *this = from_preset(value);
    paths = std::move(paths_copy);
    return;
  }
  const auto& f = detail::fields();
  auto it = f.find(key);
  if (it == f.end()) fail("ConfigError", "unknown config key '", key, "'");
  it->second.set(*this, value);
}

inline std::string RunConfig::get(const std::string& key) const {
  if (key == "preset") return preset;
  const auto& f = detail::fields();
  auto it = f.find(key);
  if (it == f.end()) fail("ConfigError", "unknown config key '", key, "'");
  return it->second.get(*this);
}

inline const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out{"preset"};
    for (const auto& [name, f] : detail::fields()) out.push_back(name);
    return out;
  }();
  return k;
}

}  // namespace lexki::cli
