#pragma once

#include <cassert>
#include <cmath>
#include <concepts>
#include <memory>
#include <memory_resource>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ksir/topic_model.hpp"
#include "ksir/types.hpp"

namespace ksir {

/// Anything that can list the in-window elements referring to an element (I_t(e)).
template <class V>
concept InfluenceView = requires(const V& view, ElementId id) {
  { view.referencers(id) } -> std::convertible_to<std::span<const Element* const>>;
};

/// Immutable inputs shared by every score evaluation.
struct ScoringContext {
  const TopicModel* model = nullptr;
  ScoringConfig cfg;
};

/// -count·p·ln p with 0·ln 0 := 0; p = 1 also yields 0.
inline double entropy_weight(std::int32_t count, double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -static_cast<double>(count) * p * std::log(p);
}

/// σ_i(w,e) = −γ(w,e)·p_i(w,e)·ln p_i(w,e) with p_i(w,e) = p_i(w)·p_i(e).
inline double word_weight(WordId w, const Element& e, TopicId topic, const TopicModel& model) {
  auto it = std::lower_bound(e.words.begin(), e.words.end(), w,
                             [](const WordCount& wc, WordId id) { return wc.word < id; });
  assert(it != e.words.end() && it->word == w && "word_weight: word not in element");
  if (it == e.words.end() || it->word != w) return 0.0;
  return entropy_weight(it->count, model.prob(topic, w) * e.topic_prob(topic));
}

/// R_i({e}) = Σ_{w ∈ V_e} σ_i(w,e).
inline double element_semantic(const Element& e, TopicId topic, const TopicModel& model) {
  const double pe = e.topic_prob(topic);
  if (pe <= 0.0) return 0.0;
  double sum = 0.0;
  for (const auto& wc : e.words) sum += entropy_weight(wc.count, model.prob(topic, wc.word) * pe);
  return sum;
}

/// R_i(S) = Σ_{w ∈ V_S} max_{e ∈ S} σ_i(w,e).
inline double semantic_score(std::span<const Element* const> set, TopicId topic, const TopicModel& model) {
  std::unordered_map<WordId, double> best;
  for (const Element* e : set) {
    const double pe = e->topic_prob(topic);
    for (const auto& wc : e->words) {
      double s = entropy_weight(wc.count, model.prob(topic, wc.word) * pe);
      auto [it, fresh] = best.try_emplace(wc.word, s);
      if (!fresh && s > it->second) it->second = s;
    }
  }
  double sum = 0.0;
  for (const auto& [w, s] : best) sum += s;
  return sum;
}

/// p_i(S ⇝ e) = 1 − Π_{e' ∈ S ∩ e.ref} (1 − p_i(e')·p_i(e)).
inline double influence_prob(std::span<const Element* const> set, const Element& e, TopicId topic) {
  const double pe = e.topic_prob(topic);
  double survive = 1.0;
  for (const Element* s : set) {
    if (std::binary_search(e.refs.begin(), e.refs.end(), s->id)) survive *= 1.0 - s->topic_prob(topic) * pe;
  }
  return 1.0 - survive;
}

/// I_{i,t}(S) = Σ_{e ∈ I_t(S)} p_i(S ⇝ e), over referencers visible in `view`.
template <InfluenceView V>
double influence_score(std::span<const Element* const> set, TopicId topic, const V& view) {
  std::unordered_set<ElementId> seen;
  double sum = 0.0;
  for (const Element* s : set) {
    for (const Element* c : view.referencers(s->id)) {
      if (seen.insert(c->id).second) sum += influence_prob(set, *c, topic);
    }
  }
  return sum;
}

/// f_i(S) = λ·R_i(S) + ((1−λ)/η)·I_{i,t}(S).
template <InfluenceView V>
double topic_score(std::span<const Element* const> set, TopicId topic, const ScoringContext& ctx, const V& view) {
  return ctx.cfg.semantic_coef() * semantic_score(set, topic, *ctx.model) +
         ctx.cfg.influence_coef() * influence_score(set, topic, view);
}

/// δ_i(e) = f_i({e}) in O(|V_e| + |I_t(e)|).
template <InfluenceView V>
double element_topic_score(const Element& e, TopicId topic, const ScoringContext& ctx, const V& view) {
  const double pe = e.topic_prob(topic);
  if (pe <= 0.0) return 0.0;
  double influence = 0.0;
  for (const Element* c : view.referencers(e.id)) influence += pe * c->topic_prob(topic);
  return ctx.cfg.semantic_coef() * element_semantic(e, topic, *ctx.model) + ctx.cfg.influence_coef() * influence;
}

/// f(S,x) = Σ_{i: x_i > 0} x_i·f_i(S).
template <InfluenceView V>
double total_score(std::span<const Element* const> set, const QueryVector& x, const ScoringContext& ctx, const V& view) {
  double sum = 0.0;
  for (const auto& tw : x.entries()) sum += tw.weight * topic_score(set, tw.topic, ctx, view);
  return sum;
}

/// Incremental f(S,x) for one candidate set S.
///
/// Per queried topic it keeps the best word weight seen so far and, for every
/// influenced window element, the probability that no member of S reaches it.
/// A marginal gain then only touches the words and referencers of the new
/// element.
class CoverageState {
 public:
  CoverageState(const QueryVector& x, const ScoringContext& ctx)
      : ctx_(&ctx), arena_(std::make_unique<std::pmr::monotonic_buffer_resource>()) {
    covers_.reserve(x.nonzero());
    for (const auto& tw : x.entries()) {
      covers_.push_back(TopicCover{tw.topic, tw.weight, WordMap(arena_.get()), SurvivalMap(arena_.get())});
    }
  }

  const std::vector<ElementId>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  double score() const { return score_; }

  bool contains(ElementId id) const {
    return std::find(members_.begin(), members_.end(), id) != members_.end();
  }

  /// Δ(e|S). Does not modify the state. Requires e ∉ S.
  template <InfluenceView V>
  double marginal_gain(const Element& e, const V& view) const {
    double gain = 0.0;
    for_each_shared_topic(e, [&](const TopicCover& cover, double pe) {
      gain += cover.weight * topic_gain(cover, e, pe, view);
    });
    return gain;
  }

  /// Adds e to S and returns the gain that was realised.
  template <InfluenceView V>
  double commit(const Element& e, const V& view) {
    double gain = 0.0;
    auto refs = view.referencers(e.id);
    for_each_shared_topic(e, [&](TopicCover& cover, double pe) {
      gain += cover.weight * topic_gain(cover, e, pe, view);
      for (const auto& wc : e.words) {
        double s = entropy_weight(wc.count, ctx_->model->prob(cover.topic, wc.word) * pe);
        if (s <= 0.0) continue;
        auto [it, fresh] = cover.word_max.try_emplace(wc.word, s);
        if (!fresh && s > it->second) it->second = s;
      }
      for (const Element* c : refs) {
        double p = pe * c->topic_prob(cover.topic);
        if (p <= 0.0) continue;
        auto [it, fresh] = cover.survival.try_emplace(c->id, 1.0);
        it->second *= 1.0 - p;
      }
    });
    members_.push_back(e.id);
    score_ += gain;
    return gain;
  }

  /// Stored survival value for (topic, element), 1 when untouched. For invariant checks.
  double survival(TopicId topic, ElementId id) const {
    for (const auto& cover : covers_) {
      if (cover.topic != topic) continue;
      auto it = cover.survival.find(id);
      return it == cover.survival.end() ? 1.0 : it->second;
    }
    return 1.0;
  }

  /// Stored max word weight for (topic, word), 0 when uncovered.
  double word_max(TopicId topic, WordId w) const {
    for (const auto& cover : covers_) {
      if (cover.topic != topic) continue;
      auto it = cover.word_max.find(w);
      return it == cover.word_max.end() ? 0.0 : it->second;
    }
    return 0.0;
  }

 private:
  using WordMap = std::pmr::unordered_map<WordId, double>;
  using SurvivalMap = std::pmr::unordered_map<ElementId, double>;
  struct TopicCover {
    TopicId topic;
    double weight;
    WordMap word_max;
    SurvivalMap survival;
  };

  // Merge-join of e's topics with the query's topics (both sorted by id).
  template <class Self, class F>
  static void for_each_shared_topic_impl(Self& self, const Element& e, F&& fn) {
    auto q = self.covers_.begin();
    for (const auto& tw : e.topics) {
      while (q != self.covers_.end() && q->topic < tw.topic) ++q;
      if (q == self.covers_.end()) break;
      if (q->topic == tw.topic && tw.weight > 0.0) fn(*q, tw.weight);
    }
  }
  template <class F>
  void for_each_shared_topic(const Element& e, F&& fn) const { for_each_shared_topic_impl(*this, e, fn); }
  template <class F>
  void for_each_shared_topic(const Element& e, F&& fn) { for_each_shared_topic_impl(*this, e, fn); }

  template <InfluenceView V>
  double topic_gain(const TopicCover& cover, const Element& e, double pe, const V& view) const {
    double semantic = 0.0;
    for (const auto& wc : e.words) {
      double s = entropy_weight(wc.count, ctx_->model->prob(cover.topic, wc.word) * pe);
      if (s <= 0.0) continue;
      auto it = cover.word_max.find(wc.word);
      double covered = it == cover.word_max.end() ? 0.0 : it->second;
      if (s > covered) semantic += s - covered;
    }
    double influence = 0.0;
    for (const Element* c : view.referencers(e.id)) {
      double p = pe * c->topic_prob(cover.topic);
      if (p <= 0.0) continue;
      auto it = cover.survival.find(c->id);
      influence += (it == cover.survival.end() ? 1.0 : it->second) * p;
    }
    return ctx_->cfg.semantic_coef() * semantic + ctx_->cfg.influence_coef() * influence;
  }

  const ScoringContext* ctx_;
  std::unique_ptr<std::pmr::monotonic_buffer_resource> arena_;  // node storage for the maps below
  std::vector<TopicCover> covers_;
  std::vector<ElementId> members_;
  double score_ = 0.0;
};

}  // namespace ksir
