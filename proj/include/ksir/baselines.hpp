#pragma once

#include <cmath>
#include <map>
#include <queue>
#include <vector>

#include "ksir/engines.hpp"
#include "ksir/index.hpp"

namespace ksir {

/// Lazy greedy (CELF) over every active element. Stale gains upper-bound the
/// current ones, so an element whose gain is fresh for the current |S| and
/// still on top is the greedy choice. Ties go to the lower id.
inline QueryResult query_celf(const StreamIndex& index, const Query& q) {
  q.validate(index);
  detail::Stopwatch clock;
  const auto& store = index.store();

  struct Entry {
    double gain;
    ElementId id;
    std::size_t round;  // |S| when gain was computed
    const Element* element;
    bool operator<(const Entry& o) const { return gain != o.gain ? gain < o.gain : id > o.id; }
  };

  CoverageState state(q.x, index.context());
  std::priority_queue<Entry> heap;
  std::size_t evaluated = 0;
  for (const Element* e : store.active_elements()) {
    heap.push({state.marginal_gain(*e, store), e->id, 0, e});
    ++evaluated;
  }
  while (state.size() < q.k && !heap.empty()) {
    Entry top = heap.top();
    heap.pop();
    if (top.round == state.size()) {
      state.commit(*top.element, store);
    } else {
      top.gain = state.marginal_gain(*top.element, store);
      top.round = state.size();
      heap.push(top);
    }
  }
  return detail::finish(state, evaluated, clock, "celf");
}

/// SieveStreaming over the active elements in id order: candidates for every
/// (1+ε)^j in [m, 2k·m], m the running max singleton score; S_φ accepts e when
/// Δ(e|S_φ) ≥ (φ/2 − f(S_φ)) / (k − |S_φ|).
inline QueryResult query_sieve(const StreamIndex& index, const Query& q) {
  q.validate(index);
  detail::Stopwatch clock;
  const auto& store = index.store();
  const double k = static_cast<double>(q.k);
  const double base = 1.0 + q.epsilon;

  CoverageState empty(q.x, index.context());
  std::map<int, CoverageState> candidates;
  double m = 0.0;
  std::size_t evaluated = 0;
  for (const Element* e : store.active_elements()) {
    const double single = empty.marginal_gain(*e, store);
    ++evaluated;
    if (single > m) {
      m = single;
      auto [j_lo, j_hi] = detail::exponent_range(m, 2.0 * k * m, q.epsilon);
      candidates.erase(candidates.begin(), candidates.lower_bound(j_lo));
      for (int j = j_lo; j <= j_hi; ++j) candidates.try_emplace(j, q.x, index.context());
    }
    for (auto& [j, state] : candidates) {
      if (state.size() >= q.k) continue;
      const double phi = std::pow(base, j);
      const double need = (phi / 2.0 - state.score()) / (k - static_cast<double>(state.size()));
      if (state.marginal_gain(*e, store) >= need) state.commit(*e, store);
    }
  }
  const CoverageState* best = nullptr;
  for (const auto& [j, state] : candidates) {
    if (!best || state.score() > best->score()) best = &state;
  }
  return detail::finish(best ? *best : empty, evaluated, clock, "sieve");
}

/// Top-k Representative: the k elements with the largest δ(e,x), found with a
/// threshold-algorithm scan of the ranked lists (stop once the k-th best seen
/// is at least UB(x)). Returned in descending δ order.
inline QueryResult query_topk_rep(const StreamIndex& index, const Query& q) {
  q.validate(index);
  detail::Stopwatch clock;
  const auto& lists = index.lists();
  const auto& store = index.store();

  struct Scored {
    double delta;
    ElementId id;
    // Min-heap on (delta, then higher id is worse).
    bool operator<(const Scored& o) const { return delta != o.delta ? delta > o.delta : id < o.id; }
  };
  std::priority_queue<Scored> best;
  TraversalCursor cursor(lists, q.x);
  std::size_t evaluated = 0;
  while (!cursor.exhausted()) {
    if (best.size() == q.k && best.top().delta >= cursor.upper_bound()) break;
    auto y = cursor.next();
    ++evaluated;
    Scored s{lists.combined(y->id, q.x), y->id};
    if (best.size() < q.k) {
      best.push(s);
    } else if (s < best.top()) {
      best.pop();
      best.push(s);
    }
  }
  std::vector<Scored> ordered;
  while (!best.empty()) {
    ordered.push_back(best.top());
    best.pop();
  }
  std::reverse(ordered.begin(), ordered.end());
  CoverageState state(q.x, index.context());
  for (const auto& s : ordered) state.commit(*store.find(s.id), store);
  return detail::finish(state, evaluated, clock, "topk");
}

/// Exhaustive optimum over all subsets of size min(k, n_t) (f is monotone).
/// Guarded: n_t ≤ 20 and C(n_t, k) ≤ 2·10^5, otherwise TooLarge.
inline QueryResult query_bruteforce(const StreamIndex& index, const Query& q) {
  q.validate(index, /*allow_zero_k=*/true);
  detail::Stopwatch clock;
  const auto& store = index.store();
  const auto active = store.active_elements();
  const std::size_t n = active.size();
  const std::size_t k = std::min(q.k, n);

  QueryResult r;
  r.engine = "bruteforce";
  if (n > 20) throw Error(ErrorCode::TooLarge, "brute force needs n_t <= 20, got " + std::to_string(n));
  double combos = 1.0;
  for (std::size_t i = 0; i < k; ++i) combos = combos * static_cast<double>(n - i) / static_cast<double>(i + 1);
  if (combos > 2e5) throw Error(ErrorCode::TooLarge, "brute force needs C(n_t,k) <= 2e5");
  if (k == 0) {
    r.elapsed_ms = clock.elapsed_ms();
    return r;
  }

  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  std::vector<const Element*> subset(k);
  double best = -1.0;
  std::vector<ElementId> best_ids;
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = active[pick[i]];
    double f = total_score(std::span<const Element* const>(subset), q.x, index.context(), store);
    if (f > best) {
      best = f;
      best_ids.clear();
      for (const Element* e : subset) best_ids.push_back(e->id);
    }
    // Next combination in lexicographic order.
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  r.evaluated = n;
  r.members = std::move(best_ids);
  r.score = best;
  r.elapsed_ms = clock.elapsed_ms();
  return r;
}

}  // namespace ksir
