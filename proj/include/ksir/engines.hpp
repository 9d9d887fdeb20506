#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "ksir/index.hpp"

namespace ksir {

/// Per-step record of an MTTS run.
struct MttsStep {
  ElementId id;
  double delta;           // δ(e,x)
  int j_lo, j_hi;         // live candidate exponents after this element (j_lo > j_hi: none)
  std::size_t accepted;   // candidates that took the element
  double ub_after;
  double th_after;
};

struct MttsTrace {
  double initial_ub = 0.0;
  std::vector<MttsStep> steps;
};

struct MttdRound {
  double tau;
  std::vector<ElementId> retrieved;  // this round's batch
  std::vector<ElementId> buffer;     // E' \ S after retrieval, sorted by id
  std::vector<ElementId> accepted;   // in order
};

struct MttdTrace {
  std::vector<MttdRound> rounds;
};

struct Retrieved {
  ElementId id;
  double delta;  // δ(e,x) from list values
};

/// Pulls every element whose list-derived upper bound still permits δ(e,x) ≥ τ,
/// i.e. keeps yielding while UB(x) ≥ τ. The cursor carries over between calls.
inline std::vector<Retrieved> retrieve_above_threshold(double tau, TraversalCursor& cursor, const RankedLists& lists,
                                                       const QueryVector& x) {
  std::vector<Retrieved> batch;
  while (!cursor.exhausted() && cursor.upper_bound() >= tau) {
    auto y = cursor.next();
    batch.push_back({y->id, lists.combined(y->id, x)});
  }
  return batch;
}

namespace detail {

// Exponents j with lo <= (1+ε)^j <= hi.
inline std::pair<int, int> exponent_range(double lo, double hi, double epsilon) {
  const double base = 1.0 + epsilon;
  const double lb = std::log(base);
  int j_lo = static_cast<int>(std::ceil(std::log(lo) / lb));
  while (std::pow(base, j_lo - 1) >= lo) --j_lo;
  while (std::pow(base, j_lo) < lo) ++j_lo;
  int j_hi = static_cast<int>(std::floor(std::log(hi) / lb));
  while (std::pow(base, j_hi + 1) <= hi) ++j_hi;
  while (std::pow(base, j_hi) > hi) --j_hi;
  return {j_lo, j_hi};
}

inline QueryResult finish(const CoverageState& state, std::size_t evaluated, const Stopwatch& clock,
                          const char* engine) {
  QueryResult r;
  r.members = state.members();
  r.score = state.score();
  r.evaluated = evaluated;
  r.elapsed_ms = clock.elapsed_ms();
  r.engine = engine;
  return r;
}

}  // namespace detail

/// Multi-Topic ThresholdStream: single pass over the ranked lists with a
/// geometric family of candidates S_φ, φ = (1+ε)^j ∈ [δ_max, 2k·δ_max].
/// Stops once UB(x) drops below the smallest threshold φ/(2k) that could still
/// accept an element. Guarantees f ≥ (1/2 − ε)·OPT; each element is evaluated
/// at most once.
inline QueryResult query_mtts(const StreamIndex& index, const Query& q, MttsTrace* trace = nullptr) {
  q.validate(index);
  detail::Stopwatch clock;
  const auto& lists = index.lists();
  const auto& store = index.store();
  const double k2 = 2.0 * static_cast<double>(q.k);
  const double base = 1.0 + q.epsilon;

  TraversalCursor cursor(lists, q.x);
  std::map<int, CoverageState> candidates;
  double delta_max = 0.0;
  int j_lo = 1, j_hi = 0;
  double th = 0.0;
  double ub = cursor.upper_bound();
  std::size_t evaluated = 0;
  if (trace) trace->initial_ub = ub;

  while (!cursor.exhausted() && ub >= th) {
    if (ub <= 0.0 && delta_max <= 0.0) break;  // every remaining score is zero
    auto y = cursor.next();
    const Element& e = *store.find(y->id);
    const double delta = lists.combined(e.id, q.x);
    ++evaluated;

    if (delta > delta_max) {
      delta_max = delta;
      std::tie(j_lo, j_hi) = detail::exponent_range(delta_max, k2 * delta_max, q.epsilon);
      candidates.erase(candidates.begin(), candidates.lower_bound(j_lo));
      for (int j = j_lo; j <= j_hi; ++j) candidates.try_emplace(j, q.x, index.context());
    }

    std::size_t accepted = 0;
    for (auto& [j, state] : candidates) {
      const double threshold = std::pow(base, j) / k2;
      if (delta >= threshold && state.size() < q.k) {
        if (state.marginal_gain(e, store) >= threshold) {
          state.commit(e, store);
          ++accepted;
        }
      }
    }

    // Smallest threshold of an unfilled candidate; candidates that do not
    // exist yet all sit above the current top exponent.
    if (candidates.empty()) {
      th = 0.0;
    } else {
      th = std::pow(base, j_hi + 1) / k2;
      for (const auto& [j, state] : candidates) {
        if (state.size() < q.k) {
          th = std::pow(base, j) / k2;
          break;
        }
      }
    }
    ub = cursor.upper_bound();
    if (trace) trace->steps.push_back({e.id, delta, j_lo, j_hi, accepted, ub, th});
  }

  const CoverageState* best = nullptr;
  for (const auto& [j, state] : candidates) {
    if (!best || state.score() > best->score()) best = &state;
  }
  if (!best) {
    QueryResult empty;
    empty.evaluated = evaluated;
    empty.elapsed_ms = clock.elapsed_ms();
    empty.engine = "mtts";
    return empty;
  }
  return detail::finish(*best, evaluated, clock, "mtts");
}

/// Multi-Topic ThresholdDescend: one candidate, rounds with geometrically
/// decreasing threshold τ, and a buffer of retrieved elements keyed by stale
/// marginal gains that are re-validated on pop. Guarantees
/// f ≥ (1 − 1/e − ε)·OPT.
inline QueryResult query_mttd(const StreamIndex& index, const Query& q, MttdTrace* trace = nullptr) {
  q.validate(index);
  detail::Stopwatch clock;
  const auto& lists = index.lists();
  const auto& store = index.store();

  struct Buffered {
    double gain;
    ElementId id;
    bool operator<(const Buffered& o) const { return gain != o.gain ? gain < o.gain : id > o.id; }
  };
  std::priority_queue<Buffered> buffer;

  TraversalCursor cursor(lists, q.x);
  CoverageState state(q.x, index.context());
  double tau = cursor.upper_bound();
  double tau_floor = 0.0;
  std::size_t evaluated = 0;

  auto buffered_ids = [&]() {
    auto copy = buffer;
    std::vector<ElementId> ids;
    while (!copy.empty()) {
      ids.push_back(copy.top().id);
      copy.pop();
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  while (tau >= tau_floor) {
    MttdRound round{tau, {}, {}, {}};
    for (const auto& r : retrieve_above_threshold(tau, cursor, lists, q.x)) {
      buffer.push({r.delta, r.id});
      ++evaluated;
      if (trace) round.retrieved.push_back(r.id);
    }
    if (trace) round.buffer = buffered_ids();

    while (!buffer.empty() && buffer.top().gain >= tau) {
      Buffered top = buffer.top();
      buffer.pop();
      const Element& e = *store.find(top.id);
      const double gain = state.marginal_gain(e, store);
      if (gain >= tau) {
        state.commit(e, store);
        if (trace) round.accepted.push_back(e.id);
        if (state.size() == q.k) {
          if (trace) trace->rounds.push_back(std::move(round));
          return detail::finish(state, evaluated, clock, "mttd");
        }
      } else {
        buffer.push({gain, top.id});
      }
    }
    if (trace) trace->rounds.push_back(std::move(round));

    if (cursor.exhausted() && (buffer.empty() || buffer.top().gain <= 0.0)) break;
    tau_floor = state.score() * q.epsilon / static_cast<double>(q.k);
    tau = (1.0 - q.epsilon) * tau;
    if (tau <= 0.0) break;
  }
  return detail::finish(state, evaluated, clock, "mttd");
}

}  // namespace ksir
