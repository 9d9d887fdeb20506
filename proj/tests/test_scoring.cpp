#include <gtest/gtest.h>

#include <random>

#include "support/oracle.hpp"

using namespace ksir;
using oracle::qv;

namespace {

std::vector<const Element*> elems(const StreamIndex& index, std::initializer_list<ElementId> ids) {
  std::vector<const Element*> out;
  for (ElementId id : ids) out.push_back(index.store().find(id));
  return out;
}

double sigma(const oracle::ToyIndex& t, WordId w, ElementId e, TopicId i) {
  return word_weight(w, *t.index.store().find(e), i, t.toy.model);
}

}  // namespace

TEST(WordWeight, TableValuesOnSecondTopic) {
  oracle::ToyIndex t;
  EXPECT_NEAR(sigma(t, 4, 2, 1), 0.18, 0.005);
  EXPECT_NEAR(sigma(t, 9, 2, 1), 0.15, 0.005);
  EXPECT_NEAR(sigma(t, 11, 2, 1), 0.20, 0.005);
  EXPECT_NEAR(sigma(t, 4, 7, 1), 0.17, 0.005);
  EXPECT_NEAR(sigma(t, 11, 7, 1), 0.19, 0.005);
}

TEST(WordWeight, ZeroProbabilityGivesZero) {
  oracle::ToyIndex t;
  // p_2(w7) = 0
  EXPECT_EQ(sigma(t, 7, 6, 1), 0.0);
  EXPECT_EQ(entropy_weight(3, 0.0), 0.0);
  EXPECT_EQ(entropy_weight(3, 1.0), 0.0);
}

TEST(WordWeight, ScalesWithFrequency) {
  EXPECT_NEAR(entropy_weight(3, 0.2), 3.0 * entropy_weight(1, 0.2), 1e-15);
  EXPECT_NEAR(entropy_weight(1, 0.2), -0.2 * std::log(0.2), 1e-15);
}

TEST(SemanticScore, TableExampleMatchesOracle) {
  oracle::ToyIndex t;
  auto S = elems(t.index, {2, 7});
  double r = semantic_score(S, 1, t.toy.model);
  EXPECT_NEAR(r, t.world().R({2, 7}, 1), 1e-12);
  EXPECT_NEAR(r, 0.5380, 5e-5);
  // e7 is covered by e2
  EXPECT_NEAR(r, semantic_score(elems(t.index, {2}), 1, t.toy.model), 1e-15);
}

TEST(SemanticScore, EmptySetIsZero) {
  oracle::ToyIndex t;
  EXPECT_EQ(semantic_score({}, 0, t.toy.model), 0.0);
}

TEST(SemanticScore, SingleElementOnFirstTopic) {
  oracle::ToyIndex t(4);
  const Element* e4 = t.index.store().find(4);
  ASSERT_NE(e4, nullptr);
  double expected = 0.12 * std::log(1 / 0.12) + 0.11 * std::log(1 / 0.11);
  EXPECT_NEAR(semantic_score(std::vector<const Element*>{e4}, 0, t.toy.model), expected, 1e-12);
  EXPECT_NEAR(expected, 0.497, 5e-4);
}

TEST(InfluenceProb, TableExample) {
  oracle::ToyIndex t;
  auto S = elems(t.index, {2, 3});
  const auto& store = t.index.store();
  EXPECT_NEAR(influence_prob(S, *store.find(6), 1), 0.03, 0.005);
  EXPECT_NEAR(influence_prob(S, *store.find(7), 1), 0.50, 0.005);
  EXPECT_NEAR(influence_prob(S, *store.find(8), 1), 0.40, 0.005);
  EXPECT_EQ(influence_prob(S, *store.find(5), 1), 0.0);
}

TEST(InfluenceScore, TableExample) {
  oracle::ToyIndex t;
  auto S = elems(t.index, {2, 3});
  double v = influence_score(std::span<const Element* const>(S), 1, t.index.store());
  EXPECT_NEAR(v, t.world().I({2, 3}, 1), 1e-12);
  EXPECT_NEAR(v, 0.93, 0.005);
}

TEST(InfluenceScore, OnlyWindowReferencesCount) {
  // At t=8 e4 has left the window, so e3 is referred to by e6 and e8 only.
  oracle::ToyIndex t;
  auto S = elems(t.index, {3});
  double v = influence_score(std::span<const Element* const>(S), 0, t.index.store());
  EXPECT_NEAR(v, 0.89 * 0.7 + 0.89 * 0.51, 1e-12);
}

TEST(TotalScore, ExampleQueriesMatchOracle) {
  oracle::ToyIndex t;
  auto w = t.world();
  for (auto x : {qv({{0, 0.5}, {1, 0.5}}), qv({{0, 0.1}, {1, 0.9}})}) {
    for (auto ids : std::vector<std::vector<ElementId>>{{1, 3}, {1, 2}, {2, 7}, {3, 6, 8}}) {
      std::vector<const Element*> S;
      for (ElementId id : ids) S.push_back(t.index.store().find(id));
      EXPECT_NEAR(total_score(std::span<const Element* const>(S), x, t.index.context(), t.index.store()), w.f(ids, x),
                  1e-12);
    }
  }
  EXPECT_NEAR(w.f({1, 3}, qv({{0, 0.5}, {1, 0.5}})), 0.65, 0.01);
}

TEST(ElementTopicScore, EqualsSingletonScore) {
  oracle::ToyIndex t;
  auto w = t.world();
  for (const Element* e : t.index.store().active_elements()) {
    for (TopicId i = 0; i < 2; ++i) {
      EXPECT_NEAR(element_topic_score(*e, i, t.index.context(), t.index.store()), w.f_topic({e->id}, i), 1e-12);
    }
  }
}

TEST(CoverageState, IncrementalMatchesFromScratch) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    oracle::RandomIndex ri(oracle::random_instance(rng, 4 + rng() % 12, 1 + rng() % 4, 12, 2 + rng() % 6,
                                                   0.1 + 0.8 * (rng() % 100) / 100.0, 0.5 + rng() % 3));
    auto w = ri.world();
    auto x = oracle::random_query(rng, ri.inst.model.topics());
    auto active = ri.index.store().active_elements();
    std::shuffle(active.begin(), active.end(), rng);
    CoverageState state(x, ri.index.context());
    std::vector<ElementId> S;
    for (const Element* e : active) {
      double before = state.score();
      double predicted = state.marginal_gain(*e, ri.index.store());
      double realised = state.commit(*e, ri.index.store());
      S.push_back(e->id);
      EXPECT_NEAR(predicted, realised, 1e-12);
      EXPECT_NEAR(state.score(), w.f(S, x), 1e-9);
      EXPECT_NEAR(state.score() - before, realised, 1e-12);
      for (const auto& tw : x.entries()) {
        for (const Element* c : ri.index.store().active_elements()) {
          double s = state.survival(tw.topic, c->id);
          EXPECT_GE(s, 0.0);
          EXPECT_LE(s, 1.0);
          for (const auto& wc : c->words) EXPECT_GE(state.word_max(tw.topic, wc.word), 0.0);
        }
      }
    }
    EXPECT_EQ(state.members(), S);
  }
}

TEST(Submodularity, GainsShrinkAsSetGrows) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    oracle::RandomIndex ri(oracle::random_instance(rng, 5 + rng() % 10, 1 + rng() % 4, 10, 3 + rng() % 8));
    auto w = ri.world();
    auto ids_set = w.active_ids();
    std::vector<ElementId> ids(ids_set.begin(), ids_set.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t t_size = rng() % ids.size();
    const std::size_t s_size = t_size ? rng() % (t_size + 1) : 0;
    std::vector<ElementId> T(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(t_size));
    std::vector<ElementId> S(T.begin(), T.begin() + static_cast<std::ptrdiff_t>(s_size));
    ElementId e = ids.back();
    if (t_size == ids.size()) continue;
    auto plus = [&](std::vector<ElementId> v) {
      v.push_back(e);
      return v;
    };
    auto x = oracle::random_query(rng, ri.inst.model.topics());
    double gain_s = w.f(plus(S), x) - w.f(S, x);
    double gain_t = w.f(plus(T), x) - w.f(T, x);
    EXPECT_GE(gain_s, gain_t - 1e-9);
    EXPECT_GE(gain_t, -1e-9);
  }
}

TEST(TotalScore, LinearInQueryVector) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    oracle::RandomIndex ri(oracle::random_instance(rng, 10, 3, 10, 6));
    auto active = ri.index.store().active_elements();
    active.resize(std::min<std::size_t>(active.size(), 3));
    std::span<const Element* const> S(active);
    auto x = oracle::random_query(rng, 3);
    double mixed = total_score(S, x, ri.index.context(), ri.index.store());
    double parts = 0.0;
    for (const auto& tw : x.entries()) {
      parts += tw.weight * total_score(S, qv({{tw.topic, 1.0}}), ri.index.context(), ri.index.store());
    }
    EXPECT_NEAR(mixed, parts, 1e-12);
  }
}
