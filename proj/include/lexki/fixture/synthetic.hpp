#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "lexki/corpus/dialog.hpp"
#include "lexki/corpus/knowledge_base.hpp"
#include "lexki/corpus/stopwords.hpp"
#include "lexki/nn/rng.hpp"

// Deterministic synthetic corpora: a large encyclopedia-style knowledge base
// for retriever training, and a small dialog task whose gold responses copy
// content words from the knowledge of the entities mentioned.
namespace lexki::fixture {

struct Article {
  std::string title;
  std::string text;  // first sentence plus a trailing filler sentence
};

// Distinct pronounceable lowercase words, none of them stopwords.
inline std::vector<std::string> pseudo_words(std::size_t n, nn::Rng& rng, std::set<std::string>& taken) {
  static const char* onset[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr",
                                "kr", "pl", "st", "tr"};
  static const char* vowel[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  static const char* coda[] = {"", "n", "r", "s", "k", "l", "x"};
  const auto stop = corpus::StopwordList::defaults();
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w;
    const auto syllables = 2 + rng.below(2);
    for (std::uint64_t s = 0; s < syllables; ++s) {
      w += onset[rng.below(std::size(onset))];
      w += vowel[rng.below(std::size(vowel))];
    }
    w += coda[rng.below(std::size(coda))];
    if (stop.contains(w) || !taken.insert(w).second) continue;
    out.push_back(w);
  }
  return out;
}

inline std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

inline const std::vector<std::string>& categories() {
  static const std::vector<std::string> c{"singer", "city", "river", "novel", "painter", "team", "planet", "dish"};
  return c;
}

// Retriever KB: every article's first sentence holds its single-token title,
// a category, three words unique to the article and two shared words.
inline std::vector<Article> retriever_articles(std::size_t n, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::set<std::string> taken;
  for (const auto& c : categories()) taken.insert(c);
  const auto titles = pseudo_words(n, rng, taken);
  const auto unique = pseudo_words(3 * n, rng, taken);
  const auto shared = pseudo_words(40, rng, taken);
  std::vector<Article> out;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& cat = categories()[rng.below(categories().size())];
    const auto& s1 = shared[rng.below(shared.size())];
    const auto& s2 = shared[rng.below(shared.size())];
    out.push_back({capitalize(titles[a]), capitalize(titles[a]) + " is a " + cat + " known for " + unique[3 * a] +
                                              " and " + unique[3 * a + 1] + ", near the " + s1 + " " +
                                              unique[3 * a + 2] + " " + s2 + ". It is often discussed."});
  }
  return out;
}

struct DialogFixtureConfig {
  std::size_t entities = 40;
  std::size_t attributes = 90;
  std::size_t train_pairs = 2000;
  std::size_t valid_pairs = 200;
  std::size_t test_pairs = 200;
  double safe_fraction = 0.3;
  double two_entity_fraction = 0.35;
  std::uint64_t seed = 7;
};

struct Entity {
  std::string name;
  std::string category;
  std::vector<std::string> attributes;  // three content words
};

struct DialogFixture {
  std::vector<Entity> entities;
  std::vector<Article> articles;
  std::vector<corpus::DialogExample> train, valid, test;
};

inline const std::vector<std::string>& safe_responses() {
  static const std::vector<std::string> s{"i don't know .", "i'm not sure about that .", "i don't know much about it ."};
  return s;
}

inline DialogFixture dialog_fixture(const DialogFixtureConfig& cfg = {}) {
  nn::Rng rng(cfg.seed);
  std::set<std::string> taken;
  for (const auto& c : categories()) taken.insert(c);
  DialogFixture fx;
  const auto names = pseudo_words(cfg.entities, rng, taken);
  const auto attrs = pseudo_words(cfg.attributes, rng, taken);
  for (std::size_t e = 0; e < cfg.entities; ++e) {
    Entity ent{names[e], categories()[rng.below(categories().size())], {}};
    std::set<std::size_t> picked;
    while (picked.size() < 3) picked.insert(rng.below(attrs.size()));
    for (std::size_t i : picked) ent.attributes.push_back(attrs[i]);
    rng.shuffle(ent.attributes.begin(), ent.attributes.end());
    fx.articles.push_back({capitalize(ent.name), capitalize(ent.name) + " is a " + ent.category + " famous for " +
                                                     ent.attributes[0] + ", " + ent.attributes[1] + " and " +
                                                     ent.attributes[2] + ". Many people like it."});
    fx.entities.push_back(std::move(ent));
  }

  static const std::vector<std::string> one{"do you know {0} ?", "what do you think about {0} ?",
                                            "tell me about {0} .", "have you heard of {0} ?"};
  static const std::vector<std::string> two{"do you prefer {0} or {1} ?", "is {0} like {1} ?",
                                            "compare {0} and {1} for me ."};
  static const std::vector<std::string> openers{"hello there .", "good morning .", "i was reading today .",
                                                "let us talk ."};
  auto fill = [](std::string t, const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
      const std::string key = "{" + std::to_string(i) + "}";
      for (auto p = t.find(key); p != std::string::npos; p = t.find(key)) t.replace(p, key.size(), args[i]);
    }
    return t;
  };
  auto attr = [&](const Entity& e) { return e.attributes[rng.below(e.attributes.size())]; };
  auto make = [&]() {
    corpus::DialogExample ex;
    if (rng.uniform() < 0.5) ex.context.push_back(openers[rng.below(openers.size())]);
    const bool pair = rng.uniform() < cfg.two_entity_fraction;
    const std::size_t ia = rng.below(fx.entities.size());
    std::size_t ib = ia;
    while (pair && ib == ia) ib = rng.below(fx.entities.size());
    const Entity& a = fx.entities[ia];
    const Entity* b = &fx.entities[ib];
    ex.utterance = pair ? fill(two[rng.below(two.size())], {a.name, b->name}) : fill(one[rng.below(one.size())], {a.name});
    if (rng.uniform() < cfg.safe_fraction) {
      ex.response = safe_responses()[rng.below(safe_responses().size())];
    } else if (pair) {
      ex.response = a.name + " has " + attr(a) + " but " + b->name + " has " + attr(*b) + " .";
    } else {
      std::string x = attr(a), y = attr(a);
      while (y == x) y = attr(a);
      static const std::vector<std::string> single{"{0} is a {1} with {2} and {3} .", "yes , i love its {2} and {3} .",
                                                   "it is known for {2} and {3} ."};
      ex.response = fill(single[rng.below(single.size())], {a.name, a.category, x, y});
    }
    ex.knowledge = corpus::extract_first_sentence(fx.articles[ia].text);
    return ex;
  };
  for (std::size_t i = 0; i < cfg.train_pairs; ++i) fx.train.push_back(make());
  for (std::size_t i = 0; i < cfg.valid_pairs; ++i) fx.valid.push_back(make());
  for (std::size_t i = 0; i < cfg.test_pairs; ++i) fx.test.push_back(make());
  return fx;
}

inline corpus::KnowledgeBase knowledge_base_of(const std::vector<Article>& articles) {
  corpus::KnowledgeBase kb;
  for (const auto& a : articles) kb.add(a.title, corpus::extract_first_sentence(a.text));
  return kb;
}

}  // namespace lexki::fixture
