#include <gtest/gtest.h>

#include <random>

#include "ksir/harness/generator.hpp"
#include "support/oracle.hpp"

using namespace ksir;
using oracle::qv;

namespace {

std::vector<ElementId> order_of(const RankedList& rl) {
  std::vector<ElementId> out;
  for (const auto& entry : rl) out.push_back(entry.id);
  return out;
}

// Every active element with p_i(e) > 0 has a tuple holding f_i({e}); nothing else is stored.
void expect_lists_match(const StreamIndex& index, const oracle::World& w, double tol = 1e-9) {
  auto active = w.active_ids();
  for (TopicId i = 0; i < index.lists().topics(); ++i) {
    const auto& rl = index.lists().list(i);
    std::size_t expected = 0;
    for (ElementId id : active) {
      const Element& e = *w.get(id);
      if (oracle::World::pe(e, i) <= 0.0) {
        EXPECT_FALSE(rl.contains(id));
        continue;
      }
      ++expected;
      auto stored = rl.score_of(id);
      ASSERT_TRUE(stored.has_value()) << "e" << id << " missing from RL" << i;
      EXPECT_NEAR(*stored, w.f_topic({id}, i), tol) << "e" << id << " RL" << i;
    }
    EXPECT_EQ(rl.size(), expected);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& entry : rl) {
      EXPECT_LE(entry.score, prev);
      prev = entry.score;
    }
  }
}

}  // namespace

TEST(RankedLists, TableListsAtEight) {
  oracle::ToyIndex t;
  const auto& lists = t.index.lists();
  EXPECT_FALSE(lists.list(0).contains(4));
  EXPECT_FALSE(lists.list(1).contains(4));
  EXPECT_EQ(order_of(lists.list(0)), (std::vector<ElementId>{3, 6, 8, 2, 1, 7, 5}));
  EXPECT_EQ(order_of(lists.list(1)), (std::vector<ElementId>{1, 2, 5, 7, 8, 6, 3}));
  EXPECT_EQ(lists.list(0).begin()->id, 3);
  EXPECT_NEAR(lists.score(0, 3), 0.6474, 5e-5);
  EXPECT_NEAR(lists.score(1, 1), 0.5598, 5e-5);
  expect_lists_match(t.index, t.world());
  EXPECT_TRUE(t.index.integrity_check().ok());
}

TEST(RankedLists, LastReferenceTime) {
  oracle::ToyIndex t;
  EXPECT_EQ(t.index.lists().list(0).last_ref_of(3), std::optional<Timestamp>(8));
  EXPECT_EQ(t.index.lists().list(0).last_ref_of(8), std::optional<Timestamp>(8));
  EXPECT_EQ(t.index.lists().list(1).last_ref_of(1), std::optional<Timestamp>(5));
}

TEST(RankedLists, EveryPrefixOfTable) {
  for (Timestamp t = 1; t <= 8; ++t) {
    oracle::ToyIndex ti(t);
    expect_lists_match(ti.index, ti.world());
  }
}

TEST(RankedLists, ScoreDropsWhenReferencerExpires) {
  // At t=8 e3 loses e4 and gains e8 as referencers.
  oracle::ToyIndex at7(7), at8(8);
  EXPECT_GT(at7.index.lists().score(0, 3), at8.index.lists().score(0, 3));
  EXPECT_NEAR(at7.index.lists().score(0, 3) - at8.index.lists().score(0, 3), 0.25 * 0.89 * (1.0 - 0.51), 1e-12);
}

TEST(RankedLists, ForcedExpiryRemovesTuples) {
  auto toy = oracle::load_toy();
  StreamIndex index(toy.model, toy.cfg);
  harness::Replayer replay(toy.stream);
  replay.advance_to(index, 8);
  for (int i = 0; i < 6; ++i) index.ingest({});
  EXPECT_EQ(index.store().active_count(), 0u);
  EXPECT_TRUE(index.lists().list(0).empty());
  EXPECT_TRUE(index.lists().list(1).empty());
  EXPECT_TRUE(index.integrity_check().ok());
}

TEST(RankedLists, RandomReplayMatchesReconstruction) {
  auto syn = harness::generate({.n = 1000, .z = 8, .m = 300, .recency = 60, .rate = 5, .seed = 17});
  ScoringConfig cfg{0.5, 1.0, 20, 5};
  StreamIndex index(syn.model, cfg);
  harness::Replayer replay(syn.stream);
  oracle::World w{&syn.model, cfg.lambda, cfg.eta, cfg.window_len, 0, {}};
  std::size_t pos = 0;
  std::size_t evictions = 0;
  while (!replay.done()) {
    replay.step(index);
    w.now = index.now();
    while (pos < syn.stream.size() && syn.stream[pos].ts <= w.now) w.seen.push_back(syn.stream[pos++]);
    auto report = index.integrity_check();
    ASSERT_TRUE(report.ok()) << "t=" << index.now() << " drift " << report.max_drift;
    if (index.now() % 40 == 0) expect_lists_match(index, w);
    evictions = std::max(evictions, w.seen.size() - index.store().active_count());
  }
  EXPECT_GT(evictions, 500u);
  expect_lists_match(index, w);
}

TEST(TraversalCursor, YieldsEachElementOnceInBoundOrder) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    oracle::RandomIndex ri(oracle::random_instance(rng, 12, 4, 10, 6));
    auto x = oracle::random_query(rng, 4);
    const auto& lists = ri.index.lists();
    TraversalCursor cursor(lists, x);
    std::set<ElementId> seen;
    double prev_ub = cursor.upper_bound();
    while (!cursor.exhausted()) {
      double ub = cursor.upper_bound();
      EXPECT_LE(ub, prev_ub + 1e-15);
      // UB bounds δ(e,x) of every element not yet yielded.
      for (const Element* e : ri.index.store().active_elements()) {
        if (!cursor.visited(e->id)) EXPECT_LE(lists.combined(e->id, x), ub + 1e-12);
      }
      auto y = cursor.next();
      ASSERT_TRUE(y.has_value());
      EXPECT_TRUE(seen.insert(y->id).second) << "e" << y->id << " yielded twice";
      prev_ub = ub;
    }
    EXPECT_EQ(cursor.visited_count(), seen.size());
    EXPECT_FALSE(cursor.next().has_value());
    // Everything with mass on a queried topic was reached.
    for (const Element* e : ri.index.store().active_elements()) {
      if (lists.combined(e->id, x) > 0.0) EXPECT_TRUE(seen.contains(e->id));
    }
  }
}

TEST(TraversalCursor, TableFirstYields) {
  oracle::ToyIndex t;
  TraversalCursor cursor(t.index.lists(), qv({{0, 0.5}, {1, 0.5}}));
  EXPECT_NEAR(cursor.upper_bound(), 0.5 * 0.6474 + 0.5 * 0.5598, 1e-4);
  EXPECT_EQ(cursor.next()->id, 3);
  EXPECT_EQ(cursor.next()->id, 1);
  EXPECT_EQ(cursor.next()->id, 2);
}
