#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ksir {

using ElementId = std::int64_t;
using WordId = std::int32_t;
using TopicId = std::int32_t;
using Timestamp = std::int64_t;

enum class ErrorCode {
  MalformedRecord,
  InvalidProbability,
  BadReference,
  NoTopicMass,
  OutOfOrderBucket,
  DuplicateId,
  InvalidQuery,
  InvalidConfig,
  TooLarge,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::BadReference: return "BadReference";
    case ErrorCode::NoTopicMass: return "NoTopicMass";
    case ErrorCode::OutOfOrderBucket: return "OutOfOrderBucket";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct WordCount {
  WordId word;
  std::int32_t count;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

struct TopicWeight {
  TopicId topic;
  double weight;

  friend bool operator==(const TopicWeight&, const TopicWeight&) = default;
};

// Sparse vector of (topic, weight) sorted by topic id.
using SparseTopics = std::vector<TopicWeight>;

inline double weight_of(std::span<const TopicWeight> entries, TopicId topic) {
  auto it = std::lower_bound(entries.begin(), entries.end(), topic,
                             [](const TopicWeight& tw, TopicId t) { return tw.topic < t; });
  return (it != entries.end() && it->topic == topic) ? it->weight : 0.0;
}

/// A social element: timestamped bag of words, the ids it refers to, and its
/// topic distribution. Words, refs and topics are kept sorted by id and
/// de-duplicated.
struct Element {
  ElementId id = 0;
  Timestamp ts = 0;
  std::vector<WordCount> words;
  std::vector<ElementId> refs;
  SparseTopics topics;

  double topic_prob(TopicId topic) const { return weight_of(topics, topic); }

  friend bool operator==(const Element&, const Element&) = default;
};

/// Topic-preference vector x. Entries hold only x_i > 0 and sum to one.
class QueryVector {
 public:
  QueryVector() = default;

  /// Normalises `weights` to sum one after dropping non-positive entries.
  /// Throws InvalidQuery when nothing positive remains or a weight is not finite.
  static QueryVector normalized(SparseTopics weights) {
    std::sort(weights.begin(), weights.end(),
              [](const TopicWeight& a, const TopicWeight& b) { return a.topic < b.topic; });
    SparseTopics kept;
    double total = 0.0;
    for (const auto& tw : weights) {
      if (!(tw.weight == tw.weight) || tw.weight < 0.0 || tw.weight > 1e300) {
        throw Error(ErrorCode::InvalidQuery, "query weight must be finite and non-negative");
      }
      if (tw.weight <= 0.0) continue;
      if (!kept.empty() && kept.back().topic == tw.topic) {
        kept.back().weight += tw.weight;
      } else {
        kept.push_back(tw);
      }
      total += tw.weight;
    }
    if (kept.empty()) throw Error(ErrorCode::InvalidQuery, "query vector has no positive entry");
    for (auto& tw : kept) tw.weight /= total;
    QueryVector x;
    x.entries_ = std::move(kept);
    return x;
  }

  std::span<const TopicWeight> entries() const { return entries_; }
  std::size_t nonzero() const { return entries_.size(); }
  double operator[](TopicId topic) const { return weight_of(entries_, topic); }

 private:
  SparseTopics entries_;
};

struct ScoringConfig {
  double lambda = 0.5;
  double eta = 1.0;
  Timestamp window_len = 1;
  Timestamp bucket_len = 1;

  double semantic_coef() const { return lambda; }
  double influence_coef() const { return (1.0 - lambda) / eta; }

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidConfig, "lambda must lie in [0,1]");
    if (!(eta > 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be positive");
    if (bucket_len < 1 || window_len < bucket_len) {
      throw Error(ErrorCode::InvalidConfig, "need window_len >= bucket_len >= 1");
    }
    if (window_len % bucket_len != 0) {
      throw Error(ErrorCode::InvalidConfig, "bucket_len must divide window_len");
    }
  }
};

}  // namespace ksir
