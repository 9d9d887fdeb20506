#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ksir/topic_model.hpp"
#include "ksir/types.hpp"

namespace ksir::harness {

/// Parameters of the synthetic skewed stream.
struct GenParams {
  std::size_t n = 1000;          // elements
  TopicId z = 50;                // topics
  WordId m = 5000;               // vocabulary
  double skew = 1.2;             // Zipf exponent for topic and word popularity
  double ref_prob = 0.8;         // chance an element refers to anything
  std::size_t max_refs = 3;
  double copy_prob = 0.95;       // pick a parent by copying an earlier reference (rich get richer)
  double recency = 2000.0;       // mean look-back, in elements, for fresh parents
  std::size_t copy_memory = 20000;  // reference events remembered for copying
  double rate = 10.0;            // elements per stream second
  std::size_t min_words = 3;
  std::size_t max_words = 10;
  std::uint64_t seed = 42;
};

struct Synthetic {
  TopicModel model;
  std::vector<Element> stream;
};

namespace detail {

inline std::vector<double> zipf_weights(std::size_t count, double s) {
  std::vector<double> w(count);
  for (std::size_t r = 0; r < count; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), s);
  return w;
}

}  // namespace detail

/// Deterministic synthetic stream and topic model.
///
/// Each word has a home topic (w mod z) and, for one word in four, a second
/// topic; topic rows are Zipf over their words. An element draws a primary
/// topic by Zipf popularity, or inherits its parent's primary topic when it
/// refers to something, and gets a secondary topic half of the time, so the
/// average element has about 1.5 topics. Parents are chosen by copying an
/// earlier reference (preferential attachment) or by an exponential look-back,
/// which concentrates influence on few elements.
inline Synthetic generate(const GenParams& p) {
  if (p.n == 0 || p.z <= 0 || p.m < p.z || p.skew < 0.0 || p.rate <= 0.0 || p.min_words == 0 ||
      p.max_words < p.min_words) {
    throw Error(ErrorCode::InvalidConfig, "invalid generator parameters");
  }
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Topic -> its words, ranked; word popularity is Zipf within the topic.
  std::vector<std::vector<WordId>> topic_words(static_cast<std::size_t>(p.z));
  for (WordId w = 0; w < p.m; ++w) {
    topic_words[w % p.z].push_back(w);
    if (unit(rng) < 0.25) {
      TopicId second = static_cast<TopicId>(rng() % static_cast<std::uint64_t>(p.z));
      if (second != w % p.z) topic_words[second].push_back(w);
    }
  }
  Synthetic out{TopicModel(p.z, p.m), {}};
  std::vector<std::discrete_distribution<std::size_t>> word_pick;
  for (TopicId t = 0; t < p.z; ++t) {
    auto& words = topic_words[t];
    std::shuffle(words.begin(), words.end(), rng);
    auto w = detail::zipf_weights(words.size(), p.skew);
    double total = 0.0;
    for (double v : w) total += v;
    for (std::size_t r = 0; r < words.size(); ++r) out.model.set(t, words[r], w[r] / total);
    word_pick.emplace_back(w.begin(), w.end());
  }

  auto topic_pop = detail::zipf_weights(static_cast<std::size_t>(p.z), p.skew);
  std::discrete_distribution<TopicId> topic_pick(topic_pop.begin(), topic_pop.end());
  std::uniform_int_distribution<std::size_t> length(p.min_words, p.max_words);
  std::exponential_distribution<double> lookback(1.0 / std::max(1.0, p.recency));

  std::vector<TopicId> primary;
  primary.reserve(p.n);
  std::vector<std::size_t> ref_events;  // parent indices, ring buffer
  std::size_t ref_head = 0;
  out.stream.reserve(p.n);

  for (std::size_t i = 0; i < p.n; ++i) {
    Element e;
    e.id = static_cast<ElementId>(i + 1);
    e.ts = static_cast<Timestamp>(std::floor(static_cast<double>(i) / p.rate)) + 1;

    // Parents must be strictly older.
    std::size_t older = 0;
    while (older < i && out.stream[i - older - 1].ts == e.ts) ++older;
    const std::size_t eligible = i - older;

    std::vector<std::size_t> parents;
    if (eligible > 0 && unit(rng) < p.ref_prob) {
      std::size_t count = 1 + static_cast<std::size_t>(rng() % p.max_refs);
      for (std::size_t c = 0; c < count; ++c) {
        std::size_t parent;
        if (!ref_events.empty() && unit(rng) < p.copy_prob) {
          parent = ref_events[rng() % ref_events.size()];
        } else {
          auto back = static_cast<std::size_t>(lookback(rng));
          parent = back >= eligible ? 0 : eligible - 1 - back;
        }
        if (parent < eligible) parents.push_back(parent);
      }
      std::sort(parents.begin(), parents.end());
      parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
    }

    TopicId main = parents.empty() || unit(rng) < 0.2 ? topic_pick(rng) : primary[parents.front()];
    primary.push_back(main);
    TopicId second = main;
    double share = 0.0;
    if (unit(rng) < 0.5) {
      second = topic_pick(rng);
      if (second != main) share = 0.1 + 0.3 * unit(rng);
    }
    if (share > 0.0) {
      e.topics.push_back({std::min(main, second), main < second ? 1.0 - share : share});
      e.topics.push_back({std::max(main, second), main < second ? share : 1.0 - share});
    } else {
      e.topics.push_back({main, 1.0});
    }

    std::map<WordId, std::int32_t> bag;
    const std::size_t len = length(rng);
    for (std::size_t w = 0; w < len; ++w) {
      TopicId t = (share > 0.0 && unit(rng) < share) ? second : main;
      bag[topic_words[t][word_pick[t](rng)]] += 1;
    }
    for (const auto& [w, c] : bag) e.words.push_back({w, c});

    for (std::size_t parent : parents) {
      e.refs.push_back(out.stream[parent].id);
      if (ref_events.size() < p.copy_memory) {
        ref_events.push_back(parent);
      } else {
        ref_events[ref_head] = parent;
        ref_head = (ref_head + 1) % p.copy_memory;
      }
    }
    out.stream.push_back(std::move(e));
  }
  return out;
}

}  // namespace ksir::harness
