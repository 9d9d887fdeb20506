#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ksir/scoring.hpp"
#include "ksir/window.hpp"

namespace ksir {

/// Ordered key of a ranked-list tuple; t_e lives in the side lookup.
struct RankedEntry {
  double score;
  ElementId id;
};

// Descending score, then ascending id.
struct RankedOrder {
  bool operator()(const RankedEntry& a, const RankedEntry& b) const {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  }
};

/// RL_i: active elements with p_i(e) > 0 ordered by δ_i(e).
class RankedList {
 public:
  using Ordered = std::set<RankedEntry, RankedOrder>;
  using const_iterator = Ordered::const_iterator;

  explicit RankedList(TopicId topic = 0) : topic_(topic) {}

  TopicId topic() const { return topic_; }
  std::size_t size() const { return ordered_.size(); }
  bool empty() const { return ordered_.empty(); }
  const_iterator begin() const { return ordered_.begin(); }
  const_iterator end() const { return ordered_.end(); }

  /// Inserts or repositions e (delete + insert on the (score, id) key).
  void upsert(ElementId id, double score, Timestamp last_ref) {
    auto it = lookup_.find(id);
    if (it != lookup_.end()) {
      ordered_.erase(RankedEntry{it->second.score, id});
      it->second = {score, last_ref};
    } else {
      lookup_.emplace(id, Slot{score, last_ref});
    }
    ordered_.insert(RankedEntry{score, id});
  }

  void erase(ElementId id) {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return;
    ordered_.erase(RankedEntry{it->second.score, id});
    lookup_.erase(it);
  }

  std::optional<double> score_of(ElementId id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second.score;
  }

  std::optional<Timestamp> last_ref_of(ElementId id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second.last_ref;
  }

  bool contains(ElementId id) const { return lookup_.contains(id); }

 private:
  struct Slot {
    double score;
    Timestamp last_ref;
  };

  TopicId topic_;
  Ordered ordered_;
  std::unordered_map<ElementId, Slot> lookup_;
};

struct IntegrityReport {
  double max_drift = 0.0;
  std::size_t missing = 0;           // active, p_i(e) > 0, but no tuple
  std::size_t extra = 0;             // tuple for an inactive element or p_i(e) = 0
  std::size_t order_violations = 0;  // adjacent tuples out of order
  std::vector<std::string> details;  // first few problems, human readable

  bool ok(double tolerance = 1e-9) const {
    return missing == 0 && extra == 0 && order_violations == 0 && max_drift <= tolerance;
  }
};

/// The per-topic ranked lists RL_1..RL_z, kept exact w.r.t. the active store:
/// every stored δ_i(e) equals f_i({e}) for the current window.
class RankedLists {
 public:
  RankedLists(const ScoringContext& ctx) : ctx_(&ctx) {
    lists_.reserve(static_cast<std::size_t>(ctx.model->topics()));
    for (TopicId t = 0; t < ctx.model->topics(); ++t) lists_.emplace_back(t);
  }

  TopicId topics() const { return static_cast<TopicId>(lists_.size()); }
  const RankedList& list(TopicId topic) const { return lists_.at(static_cast<std::size_t>(topic)); }

  /// Brings the lists in line with one ingest: new tuples for inserted
  /// elements, recomputed tuples for parents whose referencer set changed in
  /// either direction, and removal of evicted elements.
  void apply_update(const UpdateReport& report, const ActiveStore& store) {
    for (ElementId id : report.evicted) {
      const Element* e = store.archived(id);
      if (!e) continue;
      for (const auto& tw : e->topics) lists_[tw.topic].erase(id);
    }
    auto refresh = [&](ElementId id) {
      const Element* e = store.find(id);
      if (!e) return;
      const Timestamp t_e = store.last_ref(id);
      for (const auto& tw : e->topics) {
        if (tw.weight <= 0.0) continue;
        lists_[tw.topic].upsert(id, element_topic_score(*e, tw.topic, *ctx_, store), t_e);
      }
    };
    for (ElementId id : report.inserted) refresh(id);
    for (ElementId id : report.changed) refresh(id);
  }

  /// δ_i(e) as stored, 0 when e has no tuple in RL_i.
  double score(TopicId topic, ElementId id) const { return list(topic).score_of(id).value_or(0.0); }

  /// δ(e,x) = Σ_i x_i·δ_i(e) read from list values.
  double combined(ElementId id, const QueryVector& x) const {
    double sum = 0.0;
    for (const auto& tw : x.entries()) {
      if (tw.topic < topics()) sum += tw.weight * score(tw.topic, id);
    }
    return sum;
  }

  /// Recomputes every δ_i from scratch and compares with the stored tuples.
  IntegrityReport integrity_check(const ActiveStore& store) const {
    IntegrityReport rep;
    auto note = [&](std::string msg) {
      if (rep.details.size() < 16) rep.details.push_back(std::move(msg));
    };
    for (const Element* e : store.active_elements()) {
      for (const auto& tw : e->topics) {
        if (tw.weight <= 0.0) continue;
        auto stored = lists_[tw.topic].score_of(e->id);
        if (!stored) {
          ++rep.missing;
          note("missing e" + std::to_string(e->id) + " in RL" + std::to_string(tw.topic));
          continue;
        }
        double fresh = topic_score(std::span<const Element* const>(&e, 1), tw.topic, *ctx_, store);
        double drift = std::abs(*stored - fresh);
        if (drift > rep.max_drift) rep.max_drift = drift;
      }
    }
    for (const auto& rl : lists_) {
      const RankedEntry* prev = nullptr;
      for (const auto& entry : rl) {
        if (prev && RankedOrder{}(entry, *prev)) {
          ++rep.order_violations;
          note("order violation in RL" + std::to_string(rl.topic()));
        }
        prev = &entry;
        const Element* e = store.find(entry.id);
        if (!e || e->topic_prob(rl.topic()) <= 0.0) {
          ++rep.extra;
          note("stale e" + std::to_string(entry.id) + " in RL" + std::to_string(rl.topic()));
        }
      }
    }
    return rep;
  }

 private:
  const ScoringContext* ctx_;
  std::vector<RankedList> lists_;
};

/// One element yielded by a traversal step.
struct Yield {
  ElementId id;
  TopicId topic;  // list it was taken from
  double head_value;  // x_i·δ_i(e) at the time it was the head
};

/// Query-local traversal over the lists of the queried topics.
///
/// Heads always point at the first unvisited tuple of each list; an element
/// yielded from one list is skipped in every other list.
class TraversalCursor {
 public:
  TraversalCursor(const RankedLists& lists, const QueryVector& x) {
    for (const auto& tw : x.entries()) {
      if (tw.topic >= lists.topics()) continue;
      const auto& rl = lists.list(tw.topic);
      if (rl.empty()) continue;
      heads_.push_back(Head{tw.topic, tw.weight, rl.begin(), rl.end()});
    }
  }

  bool exhausted() const {
    return std::all_of(heads_.begin(), heads_.end(), [](const Head& h) { return h.pos == h.end; });
  }

  /// UB(x) = Σ_i x_i·δ_i(head_i) over non-exhausted lists.
  double upper_bound() const {
    double ub = 0.0;
    for (const auto& h : heads_) {
      if (h.pos != h.end) ub += h.weight * h.pos->score;
    }
    return ub;
  }

  /// Current head of the list for `topic`, if any.
  std::optional<ElementId> head(TopicId topic) const {
    for (const auto& h : heads_) {
      if (h.topic == topic && h.pos != h.end) return h.pos->id;
    }
    return std::nullopt;
  }

  /// Yields the unvisited element maximising x_i·δ_i(head_i) (ties: lower id,
  /// then lower topic) and marks it visited.
  std::optional<Yield> next() {
    Head* best = nullptr;
    double best_value = 0.0;
    for (auto& h : heads_) {
      if (h.pos == h.end) continue;
      double v = h.weight * h.pos->score;
      if (!best || v > best_value || (v == best_value && h.pos->id < best->pos->id)) {
        best = &h;
        best_value = v;
      }
    }
    if (!best) return std::nullopt;
    Yield y{best->pos->id, best->topic, best_value};
    visited_.insert(y.id);
    for (auto& h : heads_) skip_visited(h);
    return y;
  }

  bool visited(ElementId id) const { return visited_.contains(id); }
  std::size_t visited_count() const { return visited_.size(); }

 private:
  struct Head {
    TopicId topic;
    double weight;
    RankedList::const_iterator pos;
    RankedList::const_iterator end;
  };

  void skip_visited(Head& h) {
    while (h.pos != h.end && visited_.contains(h.pos->id)) ++h.pos;
  }

  std::vector<Head> heads_;
  std::unordered_set<ElementId> visited_;
};

}  // namespace ksir
