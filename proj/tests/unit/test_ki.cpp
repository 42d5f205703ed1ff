#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "lexki/ki/ki_loss.hpp"
#include "lexki/model/seq2seq.hpp"
#include "lexki/nn/optim.hpp"

using namespace lexki;
using corpus::KnowledgeId;
using corpus::TokenId;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

std::string kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "";
}

model::ModelConfig small_config(std::size_t d = 16) {
  model::ModelConfig c;
  c.vocab_size = 20;
  c.d_model = d;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ffn = 24;
  c.max_len = 12;
  c.dropout = 0.0;
  return c;
}

// Embedding table plus a KI head, without a dialog model around it.
template <typename T>
struct HeadFixture {
  nn::ParameterStore<T> store;
  nn::Parameter<T>* table;
  ki::KiHead<T> head;

  HeadFixture(ki::KiConfig kc, model::ModelConfig mc, std::uint64_t seed)
      : table(make_table(store, mc, seed)), head(kc, table, mc, Rng(seed + 1)) {}

  static nn::Parameter<T>* make_table(nn::ParameterStore<T>& s, const model::ModelConfig& mc, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<T> t(mc.vocab_size, mc.d_model);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.normal() * 0.3);
    return s.add("emb", std::move(t));
  }
};

double norm_of(const Tensor<double>& t, std::size_t row) {
  double s = 0.0;
  for (std::size_t j = 0; j < t.cols(); ++j) s += t(row, j) * t(row, j);
  return std::sqrt(s);
}

}  // namespace

TEST(Hinge, Examples) {
  EXPECT_EQ(ki::hinge(0.5, 0.9, 0.2), 0.0);
  EXPECT_EQ(ki::hinge(0.5, 0.4, 0.4), 0.5);
  EXPECT_EQ(ki::hinge(0.5, -0.7, -0.7), 0.5);
  EXPECT_EQ(ki::hinge(0.5, 0.1, 0.3), 0.7);
}

TEST(Hinge, TapeVersionMatchesScalarAndHasZeroGradientBeyondMargin) {
  nn::ParameterStore<double> store;
  auto* sp = store.add("sp", Tensor<double>({3, 1}, {0.9, 0.1, 0.4}));
  auto* sn = store.add("sn", Tensor<double>({3, 1}, {0.2, 0.3, 0.4}));
  Tape<double> tape;
  auto h = ki::hinge(tape.parameter(*sp), tape.parameter(*sn), 0.5);
  EXPECT_EQ(h.value()(0, 0), 0.0);
  EXPECT_NEAR(h.value()(1, 0), 0.7, 1e-15);
  EXPECT_EQ(h.value()(2, 0), 0.5);
  tape.backward(nn::sum_all(h));
  EXPECT_EQ(sp->grad(0, 0), 0.0);
  EXPECT_EQ(sn->grad(0, 0), 0.0);
  EXPECT_EQ(sp->grad(1, 0), -1.0);
  EXPECT_EQ(sn->grad(1, 0), 1.0);
}

TEST(JointLoss, Examples) {
  EXPECT_EQ(ki::joint_loss(2.0, 0.3, 0.0), 2.0);
  EXPECT_EQ(ki::joint_loss(1.2345678, 7.0, 0.0), 1.2345678);
  EXPECT_DOUBLE_EQ(ki::joint_loss(2.0, 0.3, 1.0), 2.3);
  EXPECT_EQ(ki::joint_loss(2.0, 0.0, 2.0), 2.0);
  EXPECT_EQ(kind_of([] { ki::joint_loss(1.0, 1.0, -0.1); }), "ConfigError");

  Tape<double> tape(false);
  auto nll = tape.constant(Tensor<double>({1, 1}, {2.0}));
  auto k = tape.constant(Tensor<double>({1, 1}, {0.3}));
  EXPECT_EQ(ki::joint_loss(nll, k, 0.0).value().item(), 2.0);
  EXPECT_DOUBLE_EQ(ki::joint_loss(nll, k, 1.0).value().item(), 2.3);
}

TEST(KiConfig, Validation) {
  ki::KiConfig c;
  EXPECT_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.margin, 0.5);
  EXPECT_EQ(c.negatives, 1u);
  EXPECT_EQ(ki::KiConfig::desk().d_ki, 64u);
  EXPECT_EQ(ki::KiConfig::paper().d_ki, 256u);
  c.margin = 0.0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), "ConfigError");
  c.margin = 0.5;
  c.lambda = -1.0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), "ConfigError");
}

TEST(SampleNegatives, ForcedDrawWithDisjointKnowledge) {
  // Utterance 0 aligns to {A=3}, utterance 1 to {B=8}.
  std::vector<ki::KiItem> items{{0, 0, 3}, {0, 2, 3}, {1, 5, 8}};
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    auto d = ki::sample_negatives(items, rng);
    ASSERT_EQ(d.terms.size(), 3u);
    EXPECT_EQ(d.skipped, 0u);
    EXPECT_EQ(d.terms[0].negative, 8u);
    EXPECT_EQ(d.terms[1].negative, 8u);
    EXPECT_EQ(d.terms[2].negative, 3u);
  }
}

TEST(SampleNegatives, SingleUtteranceSkipsEverything) {
  std::vector<ki::KiItem> items{{0, 0, 1}, {0, 1, 2}, {0, 4, 1}};
  Rng rng(2);
  auto d = ki::sample_negatives(items, rng);
  EXPECT_TRUE(d.terms.empty());
  EXPECT_EQ(d.skipped, 3u);
}

TEST(SampleNegatives, NeverOwnUtteranceAndReproducible) {
  Rng gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ki::KiItem> items;
    std::map<std::size_t, std::set<KnowledgeId>> own;
    const auto n = 1 + gen.below(12);
    for (std::uint64_t i = 0; i < n; ++i) {
      ki::KiItem it{gen.below(4), i, gen.below(6)};
      own[it.utterance].insert(it.positive);
      items.push_back(it);
    }
    Rng a(trial), b(trial);
    auto da = ki::sample_negatives(items, a, 2);
    auto db = ki::sample_negatives(items, b, 2);
    ASSERT_EQ(da.terms.size(), db.terms.size());
    EXPECT_EQ(da.terms.size() / 2 + da.skipped, items.size());
    for (std::size_t t = 0; t < da.terms.size(); ++t) {
      EXPECT_EQ(da.terms[t].negative, db.terms[t].negative);
      const auto& it = items[da.terms[t].item];
      EXPECT_NE(da.terms[t].negative, it.positive);
      EXPECT_FALSE(own[it.utterance].count(da.terms[t].negative));
    }
  }
}

TEST(SampleNegatives, UniformOverThreeCandidates) {
  // Item 0's candidates are {1, 2, 3}.
  std::vector<ki::KiItem> items{{0, 0, 0}, {1, 0, 1}, {2, 0, 2}, {3, 0, 3}};
  Rng rng(42);
  const int draws = 10000;
  std::map<KnowledgeId, int> count;
  for (int i = 0; i < draws; ++i) {
    auto d = ki::sample_negatives({items[0], items[1], items[2], items[3]}, rng);
    ++count[d.terms[0].negative];
  }
  ASSERT_EQ(count.size(), 3u);
  const double expected = draws / 3.0;
  const double sigma = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
  double chi2 = 0.0;
  for (auto [k, c] : count) {
    EXPECT_LT(std::abs(c - expected), 3.0 * sigma) << "id " << k;
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 99.9th percentile of chi-square with 2 degrees of freedom.
  EXPECT_LT(chi2, 13.82);
}

TEST(EncodeKnowledge, SingleTokenEqualsEncoderRow) {
  HeadFixture<double> f(ki::KiConfig{}, small_config(), 3);
  Tape<double> tape(false);
  auto states = f.head.knowledge_states(tape, {{7}}, model::RunMode::inference());
  auto g = ki::encode_knowledge(f.head, {7});
  ASSERT_EQ(g.size(), 16u);
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(g[j], states.value()(0, j), 1e-12);
}

TEST(EncodeKnowledge, MeanOfEncoderRows) {
  HeadFixture<double> f(ki::KiConfig{}, small_config(), 4);
  const std::vector<TokenId> k{4, 9, 9, 2, 11};
  Tape<double> tape(false);
  auto states = f.head.knowledge_states(tape, {k}, model::RunMode::inference());
  auto g = ki::encode_knowledge(f.head, k);
  for (std::size_t j = 0; j < g.size(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) m += states.value()(i, j);
    EXPECT_NEAR(g[j], m / k.size(), 1e-12);
  }
}

TEST(EncodeKnowledge, DuplicatedSequenceUnderPositionFreeZeroLayerEncoder) {
  ki::KiConfig kc;
  kc.encoder_layers = 0;
  kc.encoder_positions = false;
  HeadFixture<double> f(kc, small_config(), 5);
  const std::vector<TokenId> k{3, 8, 15};
  std::vector<TokenId> kk = k;
  kk.insert(kk.end(), k.begin(), k.end());
  auto g1 = ki::encode_knowledge(f.head, k);
  auto g2 = ki::encode_knowledge(f.head, kk);
  for (std::size_t j = 0; j < g1.size(); ++j) EXPECT_NEAR(g1[j], g2[j], 1e-12);
}

TEST(EncodeKnowledge, ShapeAndLengthErrors) {
  HeadFixture<float> f(ki::KiConfig{}, small_config(16), 6);
  EXPECT_EQ(ki::encode_knowledge(f.head, {1, 2, 3, 4, 5, 6, 7}).size(), 16u);
  EXPECT_EQ(kind_of([&] { ki::encode_knowledge(f.head, std::vector<TokenId>(13, 4)); }), "TooLong");
  EXPECT_EQ(kind_of([&] { ki::encode_knowledge(f.head, {}); }), "InvariantError");
}

TEST(Similarity, Examples) {
  ki::KiConfig kc;
  kc.d_ki = 8;
  HeadFixture<double> f(kc, small_config(), 7);
  auto* w1 = f.head.params().find("ki/f1.w");
  auto* w2 = f.head.params().find("ki/f2.w");
  ASSERT_NE(w1, nullptr);
  ASSERT_NE(w2, nullptr);
  w2->value = w1->value;
  Rng rng(1);
  std::vector<double> h(16), neg(16);
  for (std::size_t j = 0; j < 16; ++j) {
    h[j] = rng.normal();
    neg[j] = -h[j];
  }
  EXPECT_NEAR(ki::similarity<double>(f.head, h, h), 1.0, 1e-12);
  EXPECT_NEAR(ki::similarity<double>(f.head, h, neg), -1.0, 1e-12);

  const std::vector<double> u{0.6, 0.8}, v{1.0, 0.0};
  EXPECT_DOUBLE_EQ(ki::dot_similarity(u, v), 0.6);
  EXPECT_EQ(kind_of([&] { ki::dot_similarity(u, std::vector<double>{1.0}); }), "ShapeMismatch");
}

TEST(Similarity, ProjectionsHaveUnitNormAndScoresAreBounded) {
  ki::KiConfig kc;
  kc.d_ki = 12;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    HeadFixture<double> f(kc, small_config(), seed);
    Rng rng(seed * 31);
    Tensor<double> x(6, 16);
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.normal() * (1.0 + seed);
    Tape<double> tape(false);
    auto u = f.head.project_tokens(tape.constant(x));
    auto v = f.head.project_knowledge(tape.constant(x));
    for (std::size_t r = 0; r < 6; ++r) {
      EXPECT_NEAR(norm_of(u.value(), r), 1.0, 1e-5);
      EXPECT_NEAR(norm_of(v.value(), r), 1.0, 1e-5);
    }
    std::vector<double> h(x.storage().begin(), x.storage().begin() + 16);
    std::vector<double> g(x.storage().begin() + 16, x.storage().begin() + 32);
    const double s = ki::similarity<double>(f.head, h, g);
    EXPECT_LE(std::abs(s), 1.0 + 1e-5);
  }
}

namespace {

// A frozen toy encoder: fixed random token states, KI head trainable.
struct ToyBatch {
  Tensor<double> states;
  std::vector<ki::KiItem> items{{0, 0, 0}, {0, 2, 1}, {1, 3, 2}, {1, 4, 0}, {2, 6, 3}, {2, 7, 1}};
  std::vector<std::vector<TokenId>> knowledge{{4, 8, 9}, {5, 6}, {10, 7, 11, 4}, {9, 13}};

  explicit ToyBatch(std::uint64_t seed) : states(8, 16) {
    Rng rng(seed);
    for (std::size_t i = 0; i < states.numel(); ++i) states[i] = rng.normal();
  }

  double loss(const ki::KiHead<double>& head, Tape<double>& tape, std::uint64_t neg_seed) const {
    Rng neg(neg_seed);
    auto r = ki::ki_loss(head, tape, tape.constant(states), items,
                         [&](KnowledgeId k) -> const std::vector<TokenId>& { return knowledge[k]; }, neg,
                         model::RunMode::inference());
    if (tape.recording()) tape.backward(r.loss);
    return r.loss.value().item();
  }
};

void zero_all(const std::vector<nn::Parameter<double>*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

}  // namespace

TEST(KiLoss, SingleUtteranceBatchGivesZero) {
  HeadFixture<double> f(ki::KiConfig{}, small_config(), 8);
  ToyBatch b(1);
  std::vector<ki::KiItem> items{{0, 0, 0}, {0, 1, 1}};
  Tape<double> tape(false);
  Rng rng(1);
  auto r = ki::ki_loss(f.head, tape, tape.constant(b.states), items,
                       [&](KnowledgeId k) -> const std::vector<TokenId>& { return b.knowledge[k]; }, rng,
                       model::RunMode::inference());
  EXPECT_EQ(r.loss.value().item(), 0.0);
  EXPECT_EQ(r.terms, 0u);
  EXPECT_EQ(r.skipped, 2u);
}

TEST(KiLoss, MatchesDirectEvaluationOfEachTerm) {
  ki::KiConfig kc;
  kc.d_ki = 8;
  HeadFixture<double> f(kc, small_config(), 9);
  ToyBatch b(2);
  Tape<double> tape(false);
  const double got = b.loss(f.head, tape, 5);

  Rng neg(5);
  auto draw = ki::sample_negatives(b.items, neg);
  double sum = 0.0;
  for (const auto& t : draw.terms) {
    const auto& it = b.items[t.item];
    std::vector<double> h(b.states.storage().begin() + it.row * 16, b.states.storage().begin() + (it.row + 1) * 16);
    const auto gp = ki::encode_knowledge(f.head, b.knowledge[it.positive]);
    const auto gn = ki::encode_knowledge(f.head, b.knowledge[t.negative]);
    sum += ki::hinge(kc.margin, ki::similarity<double>(f.head, h, gp), ki::similarity<double>(f.head, h, gn));
  }
  EXPECT_NEAR(got, sum / draw.terms.size(), 1e-12);
}

TEST(KiLoss, OneAdamStepDecreasesPositiveLoss) {
  ki::KiConfig kc;
  kc.d_ki = 8;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    HeadFixture<double> f(kc, small_config(), seed);
    ToyBatch b(seed + 50);
    const auto params = f.head.params().all();
    zero_all(params);
    Tape<double> tape;
    const double before = b.loss(f.head, tape, seed);
    if (before <= 0.0) continue;
    nn::Adam<double> opt;
    opt.step(params, 1e-3);
    Tape<double> after_tape(false);
    const double after = b.loss(f.head, after_tape, seed);
    EXPECT_LT(after, before) << "seed " << seed;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(KiLoss, ZeroGradientOnceEveryMarginIsSatisfied) {
  ki::KiConfig wide;
  wide.d_ki = 8;
  wide.margin = 0.6;
  HeadFixture<double> trained(wide, small_config(), 11);
  ToyBatch b(12);
  nn::Adam<double> opt;
  double loss = 1.0;
  for (int step = 0; step < 3000 && loss > 0.0; ++step) {
    zero_all(trained.head.params().all());
    Tape<double> tape;
    loss = b.loss(trained.head, tape, 77);
    if (loss > 0.0) opt.step(trained.head.params().all(), 1e-2);
  }
  ASSERT_EQ(loss, 0.0) << "toy batch did not separate";

  // Same weights under a smaller margin: every hinge argument is at most
  // -0.4, so analytic and numeric gradients must both vanish.
  ki::KiConfig narrow = wide;
  narrow.margin = 0.2;
  HeadFixture<double> f(narrow, small_config(), 11);
  f.head.params().assign_from(trained.head.params());
  const auto params = f.head.params().all();
  zero_all(params);
  {
    Tape<double> tape;
    EXPECT_EQ(b.loss(f.head, tape, 77), 0.0);
  }
  const double h = 1e-5;
  for (auto* p : params) {
    for (std::size_t j = 0; j < p->value.numel(); ++j) {
      EXPECT_EQ(p->grad[j], 0.0) << p->name << "[" << j << "]";
      const double orig = p->value[j];
      p->value[j] = orig + h;
      Tape<double> t1(false);
      const double up = b.loss(f.head, t1, 77);
      p->value[j] = orig - h;
      Tape<double> t2(false);
      const double down = b.loss(f.head, t2, 77);
      p->value[j] = orig;
      EXPECT_EQ((up - down) / (2 * h), 0.0) << p->name << "[" << j << "]";
    }
  }
}
