#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexki/analysis/analysis.hpp"
#include "lexki/cli/config.hpp"
#include "lexki/corpus/alignment.hpp"
#include "lexki/corpus/dialog.hpp"
#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/metrics/metrics.hpp"
#include "lexki/model/beam_search.hpp"
#include "lexki/model/dialog_model.hpp"
#include "lexki/model/trainer.hpp"
#include "lexki/retrieval/index.hpp"
#include "lexki/retrieval/mining.hpp"
#include "lexki/retrieval/training.hpp"
#include "lexki/retrieval/weak_supervision.hpp"

namespace lexki::cli {

inline constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoError", "cannot read '", path, "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

struct Common {
  std::string config_file;
  std::string preset;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool json = false;
  std::map<std::string, std::string> paths;
  std::vector<std::pair<std::string, CLI::Option*>> path_options;
  std::vector<std::string> inputs;  // path keys read by the stage
};

inline void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "key = value config file");
  sub->add_option("--preset", c.preset, "desk or paper");
  sub->add_option("--set", c.sets, "override a config key (key=value), repeatable");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--threads", c.threads, "worker threads");
  sub->add_flag("--json", c.json, "machine-readable summary on stdout");
}

inline void add_path(CLI::App* sub, Common& c, const std::string& key, const std::string& help, bool input = true) {
  c.path_options.emplace_back(key, sub->add_option("--" + key, c.paths[key], help));
  if (input) c.inputs.push_back(key);
}

// Preset, then config file, then --set, then dedicated flags.
inline RunConfig resolve(const Common& c) {
  RunConfig rc = RunConfig::from_preset(c.preset.empty() ? "desk" : c.preset);
  if (!c.config_file.empty()) rc.load_file(c.config_file);
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    rc.set(RunConfig::trim(s.substr(0, eq)), RunConfig::trim(s.substr(eq + 1)));
  }
  if (c.seed) rc.seed = c.seed;
  if (c.threads) rc.threads = c.threads;
  for (const auto& [key, opt] : c.path_options)
    if (opt->count()) rc.paths[key] = c.paths.at(key);
  rc.train.seed = rc.seed;
  rc.retriever_train.seed = rc.seed;
  rc.validate();
  return rc;
}

inline const std::string& need(const RunConfig& rc, const std::string& key) {
  auto it = rc.paths.find(key);
  if (it == rc.paths.end() || it->second.empty())
    throw UsageError("missing --" + key + " (or paths." + key + " in the config file)");
  return it->second;
}

inline std::optional<std::string> maybe(const RunConfig& rc, const std::string& key) {
  auto it = rc.paths.find(key);
  if (it == rc.paths.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

inline corpus::StopwordList stopwords_of(const RunConfig& rc) {
  if (auto p = maybe(rc, "stopwords")) return corpus::StopwordList::load(*p);
  return corpus::StopwordList::defaults();
}

inline void log_line(const Io& io, nlohmann::ordered_json j) { io.err << j.dump() << std::endl; }

inline void summary(const Io& io, const Common& c, const nlohmann::ordered_json& j) {
  if (c.json) {
    io.out << j.dump() << "\n";
    return;
  }
  for (const auto& [k, v] : j.items()) io.out << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << "\n";
}

// <out>.manifest.json: enough to rerun the stage bit-identically with one thread.
inline void write_manifest(const std::string& out, const std::string& command, const RunConfig& rc,
                           const Common& c) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = rc.seed;
  m["threads"] = rc.threads;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(rc.hash()));
  m["config_hash"] = hex;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& key : c.inputs) {
    if (auto p = maybe(rc, key)) inputs[*p] = file_hash(*p);
  }
  m["inputs"] = inputs;
  m["config"] = rc.dump();
  std::ofstream f(out + ".manifest.json", std::ios::binary);
  if (!f) fail("IoError", "cannot write manifest for '", out, "'");
  f << m.dump(2) << "\n";
}

inline std::vector<std::vector<std::string>> utterance_tokens(const std::vector<corpus::DialogExample>& data) {
  std::vector<std::vector<std::string>> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(corpus::tokenize(ex.utterance));
  return out;
}

struct LoadedDialog {
  model::DialogModel<float> model;
  corpus::Vocabulary vocab;
};

// A dialog checkpoint travels with its vocabulary in <path>.vocab.
inline LoadedDialog load_dialog_with_vocab(const std::string& path) {
  auto m = model::load_dialog<float>(path);
  auto v = corpus::Vocabulary::load(path + ".vocab");
  if (v.hash() != m.vocab_hash) fail("CheckpointError", "vocabulary '", path, ".vocab' does not match the checkpoint");
  return {std::move(m), std::move(v)};
}

inline std::string respond(const LoadedDialog& d, const corpus::DialogExample& ex, const model::DecodeParams& dp,
                           std::size_t* tokens = nullptr) {
  const auto enc = model::encode_example(ex, d.vocab, d.model.seq2seq.config().max_len, d.model.max_context_turns);
  const auto ids = model::generate(d.model.seq2seq, enc.source, dp);
  if (tokens) *tokens += ids.size();
  return corpus::detokenize(d.vocab.decode(ids));
}

}  // namespace detail

// Runs one subcommand. Exit codes: 0 success, 1 domain error, 2 usage error.
inline int run(const std::vector<std::string>& args, Io io) {
  CLI::App app{"Knowledge internalization toolkit for dialog models", "lexki"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  using detail::Common;
  std::map<std::string, Common> common;
  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    detail::add_common(s, common[name]);
    subs[name] = s;
    return s;
  };

  auto* build_kb = sub("build-kb", "Extract article first sentences into a knowledge base");
  detail::add_path(build_kb, common["build-kb"], "articles", "articles JSONL {title, text}");
  detail::add_path(build_kb, common["build-kb"], "out", "knowledge base JSONL to write", false);

  auto* train_ret = sub("train-retriever", "Train the token-to-knowledge retriever on weak supervision");
  detail::add_path(train_ret, common["train-retriever"], "kb", "knowledge base JSONL");
  detail::add_path(train_ret, common["train-retriever"], "stopwords", "stopword list");
  detail::add_path(train_ret, common["train-retriever"], "out", "retriever checkpoint to write", false);

  bool no_masking = false, no_exact = false;
  auto* mine = sub("mine", "Align utterance tokens to knowledge");
  detail::add_path(mine, common["mine"], "retriever", "retriever checkpoint");
  detail::add_path(mine, common["mine"], "kb", "knowledge base JSONL");
  detail::add_path(mine, common["mine"], "corpus", "dialog corpus JSONL");
  detail::add_path(mine, common["mine"], "stopwords", "stopword list");
  detail::add_path(mine, common["mine"], "out", "alignments JSONL to write", false);
  mine->add_flag("--no-stopword-masking", no_masking, "align stopwords and punctuation too");
  mine->add_flag("--no-exact-matching", no_exact, "retrieve title tokens instead of matching them");

  std::optional<double> lambda;
  std::string variant;
  std::size_t max_steps = 0, epochs = 0;
  auto* train = sub("train", "Train a dialog model, with knowledge internalization when lambda > 0");
  detail::add_path(train, common["train"], "corpus", "training dialogs JSONL");
  detail::add_path(train, common["train"], "valid", "validation dialogs JSONL");
  detail::add_path(train, common["train"], "kb", "knowledge base JSONL");
  detail::add_path(train, common["train"], "alignments", "alignments of the training corpus");
  detail::add_path(train, common["train"], "lexicon", "extra noun lexicon for factual/linguistic variants");
  detail::add_path(train, common["train"], "out", "dialog checkpoint to write", false);
  train->add_option("--lambda", lambda, "KI weight");
  train->add_option("--variant", variant, "token_level, random, sentence_level, factual_only, linguistic_only");
  train->add_option("--max-steps", max_steps, "stop after this many updates");
  train->add_option("--epochs", epochs, "maximum epochs");

  std::size_t beam = 0;
  auto* gen = sub("generate", "Generate responses for a dialog corpus");
  detail::add_path(gen, common["generate"], "model", "dialog checkpoint");
  detail::add_path(gen, common["generate"], "corpus", "dialog corpus JSONL");
  detail::add_path(gen, common["generate"], "out", "responses JSONL to write", false);
  gen->add_option("--beam", beam, "beam size");

  std::string hyps_path;
  auto* eval = sub("evaluate", "Score generated responses and write an evaluation report");
  detail::add_path(eval, common["evaluate"], "model", "dialog checkpoint");
  detail::add_path(eval, common["evaluate"], "corpus", "reference dialogs JSONL");
  detail::add_path(eval, common["evaluate"], "kb", "knowledge base JSONL (entity score, coverage)");
  detail::add_path(eval, common["evaluate"], "alignments", "alignments of the evaluated corpus (coverage)");
  detail::add_path(eval, common["evaluate"], "stopwords", "stopword list");
  detail::add_path(eval, common["evaluate"], "out", "report JSON to write", false);
  eval->add_option("--hyps", hyps_path, "responses JSONL from generate (default: generate now)");
  eval->add_option("--beam", beam, "beam size");

  std::string probe;
  auto* analyze = sub("analyze", "Embedding geometry and alignment analysis");
  detail::add_path(analyze, common["analyze"], "model", "dialog checkpoint");
  detail::add_path(analyze, common["analyze"], "corpus", "dialog corpus the alignments index");
  detail::add_path(analyze, common["analyze"], "alignments", "alignments JSONL");
  detail::add_path(analyze, common["analyze"], "kb", "knowledge base JSONL");
  detail::add_path(analyze, common["analyze"], "lexicon", "extra noun lexicon");
  detail::add_path(analyze, common["analyze"], "stopwords", "stopword list");
  detail::add_path(analyze, common["analyze"], "out", "report JSON to write", false);
  analyze->add_option("--probe", probe, "comma-separated tokens for the embedding report");

  auto* chat = sub("chat", "Talk to a dialog checkpoint on stdin; 'quit' or EOF ends");
  detail::add_path(chat, common["chat"], "model", "dialog checkpoint");
  chat->add_option("--beam", beam, "beam size");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    io.out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    io.err << "usage error: " << e.what() << "\n";
    CLI::App* active = &app;
    for (auto& [name, s] : subs)
      if (s->parsed()) active = s;
    io.err << active->help();
    return 2;
  }

  std::string name;
  for (auto& [n, s] : subs)
    if (s->parsed()) name = n;
  Common& c = common[name];

  try {
    RunConfig rc = detail::resolve(c);
    if (name == "build-kb") {
      const auto& out = detail::need(rc, "out");
      const auto kb = corpus::build_knowledge_base(detail::need(rc, "articles"));
      kb.save(out);
      detail::write_manifest(out, name, rc, c);
      detail::log_line(io, {{"stage", name}, {"items", kb.size()}});
      detail::summary(io, c, {{"knowledge_items", kb.size()}, {"out", out}});
    } else if (name == "train-retriever") {
      const auto& out = detail::need(rc, "out");
      const auto kb = corpus::KnowledgeBase::load(detail::need(rc, "kb"));
      std::vector<std::vector<std::string>> streams;
      for (const auto& it : kb.items()) streams.push_back(corpus::tokenize(it.text));
      const auto vocab = corpus::Vocabulary::build(streams, rc.vocab_max);
      const auto stop = detail::stopwords_of(rc);
      const auto pairs = retrieval::build_weak_supervision(kb, stop);
      auto r = retrieval::train_retriever<float>(pairs, kb, vocab, rc.retriever, rc.retriever_train,
                                                 [&](const retrieval::RetrieverEpochLog& l) {
                                                   nlohmann::ordered_json j{{"stage", name}, {"epoch", l.epoch},
                                                                            {"steps", l.steps},
                                                                            {"train_loss", l.train_loss}};
                                                   if (!std::isnan(l.heldout_loss)) j["heldout_loss"] = l.heldout_loss;
                                                   detail::log_line(io, j);
                                                 });
      retrieval::save_retriever(out, r.model);
      detail::write_manifest(out, name, rc, c);
      nlohmann::ordered_json s{{"weak_pairs", pairs.size()}, {"epochs", r.epochs.size()}, {"steps", r.steps},
                               {"best_epoch", r.best_epoch}};
      const auto unique = retrieval::unique_token_pairs(r.heldout_pairs, kb);
      if (!unique.empty()) {
        const auto index = retrieval::build_index(r.model, kb);
        s["heldout_unique_top1"] = retrieval::top1_accuracy(r.model, index, kb, unique, false);
      }
      s["out"] = out;
      detail::summary(io, c, s);
    } else if (name == "mine") {
      const auto& out = detail::need(rc, "out");
      if (no_masking) rc.mine.stopword_masking = false;
      if (no_exact) rc.mine.exact_matching = false;
      const auto m = retrieval::load_retriever<float>(detail::need(rc, "retriever"));
      const auto kb = corpus::KnowledgeBase::load(detail::need(rc, "kb"));
      const auto data = corpus::load_dialog_corpus(detail::need(rc, "corpus"));
      const auto stop = detail::stopwords_of(rc);
      const auto index = retrieval::build_index(m, kb);
      const auto records = retrieval::mine_corpus(m, index, kb, stop, data, rc.mine, rc.threads);
      corpus::save_alignments(out, records);
      detail::write_manifest(out, name, rc, c);
      nlohmann::ordered_json s{{"examples", data.size()}, {"records", records.size()}};
      if (!records.empty()) {
        const auto st = retrieval::coverage_stats(records, detail::utterance_tokens(data));
        s["knowledge_per_token"] = st.per_token;
        s["knowledge_per_sentence"] = st.per_sentence;
      }
      s["out"] = out;
      detail::log_line(io, {{"stage", name}, {"records", records.size()}});
      detail::summary(io, c, s);
    } else if (name == "train") {
      const auto& out = detail::need(rc, "out");
      if (lambda) rc.ki.lambda = *lambda;
      if (!variant.empty()) rc.variant = variant;
      if (max_steps) rc.train.max_steps = max_steps;
      if (epochs) rc.train.max_epochs = epochs;
      rc.validate();
      const auto data = corpus::load_dialog_corpus(detail::need(rc, "corpus"));
      std::vector<corpus::DialogExample> valid;
      if (auto p = detail::maybe(rc, "valid")) valid = corpus::load_dialog_corpus(*p);
      std::optional<corpus::KnowledgeBase> kb;
      if (auto p = detail::maybe(rc, "kb")) kb = corpus::KnowledgeBase::load(*p);
      std::vector<std::vector<std::string>> streams;
      for (const auto& ex : data) {
        streams.push_back(corpus::tokenize(ex.utterance));
        streams.push_back(corpus::tokenize(ex.response));
        for (const auto& t : ex.context) streams.push_back(corpus::tokenize(t));
      }
      if (kb)
        for (const auto& it : kb->items()) streams.push_back(corpus::tokenize(it.text));
      const auto vocab = corpus::Vocabulary::build(streams, rc.vocab_max);
      std::optional<model::KiInputs> ki_inputs;
      std::vector<corpus::AlignmentRecord> aligned;
      if (rc.ki.lambda > 0.0) {
        if (!kb) fail("MissingAlignments", "lambda > 0 needs --kb");
        const auto apath = detail::maybe(rc, "alignments");
        if (!apath) fail("MissingAlignments", "lambda > 0 needs --alignments");
        const auto raw = corpus::load_alignments(*apath);
        const auto lexicon = analysis::noun_lexicon(*kb, detail::maybe(rc, "lexicon").value_or(""));
        aligned = analysis::make_variant({analysis::parse_variant(rc.variant), rc.seed}, raw, *kb,
                                         detail::utterance_tokens(data), lexicon);
        ki_inputs = model::KiInputs{&*kb, &aligned};
      }
      auto r = model::train_dialog<float>(data, valid, vocab, rc.model, rc.train, ki_inputs, rc.ki,
                                          [&](const model::EpochLog& l) {
                                            nlohmann::ordered_json j{{"stage", name},
                                                                     {"epoch", l.epoch},
                                                                     {"steps", l.steps},
                                                                     {"first_nll", l.first_nll},
                                                                     {"train_nll", l.train_nll},
                                                                     {"train_ki", l.train_ki}};
                                            if (!std::isnan(l.valid_nll)) j["valid_nll"] = l.valid_nll;
                                            detail::log_line(io, j);
                                          });
      model::save_dialog(r.model, out);
      vocab.save(out + ".vocab");
      detail::write_manifest(out, name, rc, c);
      nlohmann::ordered_json s{{"lambda", rc.ki.lambda},
                               {"variant", rc.variant},
                               {"vocab_size", vocab.size()},
                               {"steps", r.steps.size()},
                               {"epochs", r.epochs.size()},
                               {"best_epoch", r.best_epoch}};
      if (!r.steps.empty()) s["first_nll"] = r.steps.front().nll;
      if (std::isfinite(r.best_valid_nll)) s["best_valid_nll"] = r.best_valid_nll;
      s["out"] = out;
      detail::summary(io, c, s);
    } else if (name == "generate") {
      const auto& out = detail::need(rc, "out");
      if (beam) rc.decode.beam_size = beam;
      const auto d = detail::load_dialog_with_vocab(detail::need(rc, "model"));
      const auto data = corpus::load_dialog_corpus(detail::need(rc, "corpus"));
      std::ofstream f(out, std::ios::binary);
      if (!f) fail("IoError", "cannot write '", out, "'");
      std::size_t tokens = 0;
      const auto t0 = std::chrono::steady_clock::now();
      for (const auto& ex : data) {
        nlohmann::ordered_json j{{"response", detail::respond(d, ex, rc.decode, &tokens)}};
        f << j.dump() << "\n";
      }
      const auto tp = metrics::throughput(
          data.size(), tokens, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      f.close();
      detail::write_manifest(out, name, rc, c);
      detail::summary(io, c, {{"responses", data.size()}, {"sentences_per_sec", tp.sentences_per_sec},
                              {"tokens_per_sec", tp.tokens_per_sec}, {"out", out}});
    } else if (name == "evaluate") {
      if (beam) rc.decode.beam_size = beam;
      const auto d = detail::load_dialog_with_vocab(detail::need(rc, "model"));
      const auto data = corpus::load_dialog_corpus(detail::need(rc, "corpus"));
      if (data.empty()) fail("EmptyCorpus", "nothing to evaluate");
      std::vector<std::string> texts;
      metrics::EvalReport rep;
      if (!hyps_path.empty()) {
        c.inputs.push_back("hyps");
        rc.paths["hyps"] = hyps_path;
        std::ifstream f(hyps_path);
        if (!f) fail("IoError", "cannot open '", hyps_path, "'");
        std::string line;
        while (std::getline(f, line)) {
          if (RunConfig::trim(line).empty()) continue;
          const auto j = nlohmann::json::parse(line, nullptr, false);
          if (j.is_discarded() || !j.contains("response") || !j["response"].is_string())
            fail("ParseError", hyps_path, ": expected {\"response\": string} per line");
          texts.push_back(j["response"].get<std::string>());
        }
        if (texts.size() != data.size())
          fail("LengthMismatch", texts.size(), " responses for ", data.size(), " reference dialogs");
      } else {
        std::size_t tokens = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& ex : data) texts.push_back(detail::respond(d, ex, rc.decode, &tokens));
        rep.speed = metrics::throughput(
            data.size(), tokens, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
      std::vector<metrics::Tokens> hyps, refs;
      std::vector<std::optional<metrics::Tokens>> know;
      bool any_knowledge = false;
      std::vector<model::SourceTarget> pairs;
      const auto& mc = d.model.seq2seq.config();
      for (std::size_t i = 0; i < data.size(); ++i) {
        hyps.push_back(corpus::tokenize(texts[i]));
        refs.push_back(corpus::tokenize(data[i].response));
        if (data[i].knowledge) {
          know.push_back(corpus::tokenize(*data[i].knowledge));
          any_knowledge = true;
        } else {
          know.push_back(std::nullopt);
        }
        auto e = model::encode_example(data[i], d.vocab, mc.max_len, d.model.max_context_turns, i);
        pairs.push_back({std::move(e.source), std::move(e.target)});
      }
      const auto [nll_sum, count] = model::corpus_nll(d.model.seq2seq, pairs);
      rep.ppl = model::perplexity_from(nll_sum, count);
      rep.bleu4 = metrics::bleu4(hyps, refs);
      rep.rouge_l = metrics::rouge_l(hyps, refs);
      rep.distinct1 = metrics::distinct_n(hyps, 1);
      rep.distinct2 = metrics::distinct_n(hyps, 2);
      rep.safe_rate = metrics::safe_rate(texts);
      if (any_knowledge) rep.wiki_f1 = metrics::wiki_f1(hyps, know);
      if (auto p = detail::maybe(rc, "kb")) {
        const auto kb = corpus::KnowledgeBase::load(*p);
        rep.entity_score = metrics::entity_score(hyps, kb);
        if (auto a = detail::maybe(rc, "alignments"))
          rep.knowledge_coverage = metrics::knowledge_coverage(refs, corpus::load_alignments(*a), kb,
                                                               detail::stopwords_of(rc));
      }
      rep.validate();
      if (auto out = detail::maybe(rc, "out")) {
        std::ofstream f(*out, std::ios::binary);
        if (!f) fail("IoError", "cannot write '", *out, "'");
        f << rep.to_json().dump(2) << "\n";
        f.close();
        detail::write_manifest(*out, name, rc, c);
      }
      detail::summary(io, c, rep.to_json());
    } else if (name == "analyze") {
      const auto d = detail::load_dialog_with_vocab(detail::need(rc, "model"));
      const auto& table = d.model.seq2seq.embedding().value;
      nlohmann::ordered_json rep;
      if (!probe.empty()) {
        std::vector<std::string> toks;
        std::stringstream ss(probe);
        for (std::string t; std::getline(ss, t, ',');)
          if (!RunConfig::trim(t).empty()) toks.push_back(RunConfig::trim(t));
        rep["embedding"] = analysis::embedding_report(table, d.vocab, toks);
      }
      const auto corpus_path = detail::maybe(rc, "corpus");
      const auto align_path = detail::maybe(rc, "alignments");
      const auto kb_path = detail::maybe(rc, "kb");
      if (corpus_path && align_path && kb_path) {
        const auto data = corpus::load_dialog_corpus(*corpus_path);
        const auto records = corpus::load_alignments(*align_path);
        const auto kb = corpus::KnowledgeBase::load(*kb_path);
        const auto utts = detail::utterance_tokens(data);
        const auto stop = detail::stopwords_of(rc);
        rep["aligned_distance"] = analysis::aligned_distance(table, d.vocab, utts, records, kb, stop);
        const auto split = analysis::split_factual_linguistic(
            records, utts, analysis::noun_lexicon(kb, detail::maybe(rc, "lexicon").value_or("")));
        rep["factual_records"] = split.factual.size();
        rep["linguistic_records"] = split.linguistic.size();
        std::vector<metrics::Tokens> gold;
        for (const auto& ex : data) gold.push_back(corpus::tokenize(ex.response));
        rep["knowledge_coverage"] = metrics::knowledge_coverage(gold, records, kb, stop);
        if (!records.empty()) {
          const auto st = retrieval::coverage_stats(records, utts);
          rep["knowledge_per_token"] = st.per_token;
          rep["knowledge_per_sentence"] = st.per_sentence;
        }
      } else if (corpus_path || align_path || kb_path) {
        throw UsageError("alignment analysis needs --corpus, --alignments and --kb together");
      }
      if (rep.empty()) throw UsageError("analyze needs --probe and/or --corpus/--alignments/--kb");
      if (auto out = detail::maybe(rc, "out")) {
        std::ofstream f(*out, std::ios::binary);
        if (!f) fail("IoError", "cannot write '", *out, "'");
        f << rep.dump(2) << "\n";
        f.close();
        detail::write_manifest(*out, name, rc, c);
      }
      if (c.json || !detail::maybe(rc, "out")) {
        io.out << rep.dump() << "\n";
      } else {
        io.out << "wrote " << *detail::maybe(rc, "out") << "\n";
      }
    } else if (name == "chat") {
      if (beam) rc.decode.beam_size = beam;
      const auto d = detail::load_dialog_with_vocab(detail::need(rc, "model"));
      std::vector<std::string> history;
      std::string line;
      while (true) {
        io.out << "> " << std::flush;
        if (!std::getline(io.in, line)) break;
        line = RunConfig::trim(line);
        if (line.empty()) continue;
        if (line == "quit") break;
        corpus::DialogExample ex;
        ex.context = history;
        ex.utterance = line;
        const std::string reply = detail::respond(d, ex, rc.decode);
        io.out << reply << "\n";
        history.push_back(line);
        history.push_back(reply);
        while (history.size() > rc.chat_turns) history.erase(history.begin());
      }
      io.out << "\n";
    }
  } catch (const UsageError& e) {
    io.err << "usage error: " << e.what() << "\n" << subs[name]->help();
    return 2;
  } catch (const Error& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(int argc, char** argv, Io io) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, io);
}

}  // namespace lexki::cli
