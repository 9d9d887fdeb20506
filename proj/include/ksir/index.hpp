#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "ksir/ranked_lists.hpp"
#include "ksir/scoring.hpp"
#include "ksir/topic_model.hpp"
#include "ksir/window.hpp"

namespace ksir {

/// Active window plus ranked lists over one stream, updated bucket by bucket.
///
/// Single writer: `ingest` must not run while queries read the index. Queries
/// only take const references and keep all their state locally.
class StreamIndex {
 public:
  StreamIndex(const TopicModel& model, ScoringConfig cfg, Timestamp start = 0)
      : ctx_{&model, (cfg.validate(), cfg)}, store_(cfg.window_len, cfg.bucket_len, start), lists_(ctx_) {}

  StreamIndex(const StreamIndex&) = delete;
  StreamIndex& operator=(const StreamIndex&) = delete;

  /// Ingests the next bucket and updates the lists. Elements must carry topic
  /// ids known to the model.
  UpdateReport ingest(std::vector<Element> bucket) {
    for (const auto& e : bucket) {
      for (const auto& tw : e.topics) {
        if (tw.topic < 0 || tw.topic >= ctx_.model->topics()) {
          throw Error(ErrorCode::MalformedRecord, "element " + std::to_string(e.id) + " has unknown topic " +
                                                      std::to_string(tw.topic));
        }
      }
    }
    UpdateReport report = store_.ingest_bucket(std::move(bucket));
    lists_.apply_update(report, store_);
    return report;
  }

  const ScoringContext& context() const { return ctx_; }
  const TopicModel& model() const { return *ctx_.model; }
  const ScoringConfig& config() const { return ctx_.cfg; }
  const ActiveStore& store() const { return store_; }
  const RankedLists& lists() const { return lists_; }
  Timestamp now() const { return store_.now(); }

  IntegrityReport integrity_check() const { return lists_.integrity_check(store_); }

 private:
  ScoringContext ctx_;
  ActiveStore store_;
  RankedLists lists_;
};

/// q_t(k, x) with the engines' ε.
struct Query {
  std::size_t k = 10;
  QueryVector x;
  double epsilon = 0.1;
  std::optional<Timestamp> at;  // must match the index time when set

  void validate(const StreamIndex& index, bool allow_zero_k = false) const {
    if (k == 0 && !allow_zero_k) throw Error(ErrorCode::InvalidQuery, "k must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidQuery, "epsilon must lie in (0,1)");
    if (x.nonzero() == 0) throw Error(ErrorCode::InvalidQuery, "empty query vector");
    if (at && *at != index.now()) {
      throw Error(ErrorCode::InvalidQuery, "query time " + std::to_string(*at) + " does not match index time " +
                                               std::to_string(index.now()));
    }
  }
};

struct QueryResult {
  std::vector<ElementId> members;  // in acceptance order
  double score = 0.0;
  std::size_t evaluated = 0;  // distinct elements whose δ(e,x) or Δ(e|S) was computed
  double elapsed_ms = 0.0;
  std::string engine;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

}  // namespace ksir
