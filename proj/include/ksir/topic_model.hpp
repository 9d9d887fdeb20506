#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "ksir/types.hpp"

namespace ksir {

/// Read-only topic-word oracle: z sparse multinomials p_i(w) over m words.
///
/// Probabilities are indexed both per topic (rows, for validation and output)
/// and per word (columns, for the scoring hot path where an element's words
/// are looked up against one topic at a time).
class TopicModel {
 public:
  // Rows may drop words below this probability.
  static constexpr double kSparseFloor = 1e-8;
  static constexpr double kRowTolerance = 1e-4;

  TopicModel() = default;

  TopicModel(TopicId topics, WordId vocab) : rows_(static_cast<std::size_t>(topics)), columns_(static_cast<std::size_t>(vocab)) {
    if (topics <= 0 || vocab <= 0) throw Error(ErrorCode::MalformedRecord, "topic model needs z > 0 and m > 0");
  }

  TopicId topics() const { return static_cast<TopicId>(rows_.size()); }
  WordId vocab() const { return static_cast<WordId>(columns_.size()); }

  void set(TopicId topic, WordId word, double prob) {
    check_ids(topic, word);
    if (!(prob >= 0.0 && prob <= 1.0)) {
      throw Error(ErrorCode::InvalidProbability, "p_i(w) outside [0,1] for topic " + std::to_string(topic));
    }
    upsert(rows_[topic], {word, prob});
    upsert(columns_[word], {topic, prob});
  }

  double prob(TopicId topic, WordId word) const {
    if (word < 0 || word >= vocab()) return 0.0;
    return weight_of(columns_[word], topic);
  }

  /// Topics on which `word` has mass, sorted by topic id.
  std::span<const TopicWeight> word_topics(WordId word) const {
    if (word < 0 || word >= vocab()) return {};
    return columns_[word];
  }

  /// Throws InvalidProbability when a stored row does not sum to one within kRowTolerance.
  void validate() const {
    for (TopicId t = 0; t < topics(); ++t) {
      double sum = 0.0;
      for (const auto& e : rows_[t]) sum += e.prob;
      if (std::abs(sum - 1.0) > kRowTolerance) {
        throw Error(ErrorCode::InvalidProbability,
                    "topic " + std::to_string(t) + " row sums to " + std::to_string(sum));
      }
    }
  }

  /// Parses "z m" then "topic word prob" lines. Blank lines and '#' comments are skipped.
  static TopicModel parse(std::istream& in, bool check_rows = true) {
    std::string line;
    TopicModel model;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ls(line);
      if (!have_header) {
        long long z = 0, m = 0;
        if (!(ls >> z >> m)) throw Error(ErrorCode::MalformedRecord, "topic model header must be 'z m'");
        model = TopicModel(static_cast<TopicId>(z), static_cast<WordId>(m));
        have_header = true;
        continue;
      }
      long long topic = 0, word = 0;
      double p = 0.0;
      if (!(ls >> topic >> word >> p)) {
        throw Error(ErrorCode::MalformedRecord, "topic model line " + std::to_string(lineno));
      }
      model.set(static_cast<TopicId>(topic), static_cast<WordId>(word), p);
    }
    if (!have_header) throw Error(ErrorCode::MalformedRecord, "empty topic model");
    if (check_rows) model.validate();
    return model;
  }

  static TopicModel load(const std::string& path, bool check_rows = true) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open topic model " + path);
    return parse(in, check_rows);
  }

  void write(std::ostream& out) const {
    out << topics() << ' ' << vocab() << '\n';
    out.precision(17);
    for (TopicId t = 0; t < topics(); ++t) {
      for (const auto& e : rows_[t]) out << t << ' ' << e.word << ' ' << e.prob << '\n';
    }
  }

 private:
  struct WordProb {
    WordId word;
    double prob;
  };

  void check_ids(TopicId topic, WordId word) const {
    if (topic < 0 || topic >= topics()) throw Error(ErrorCode::MalformedRecord, "topic id out of range: " + std::to_string(topic));
    if (word < 0 || word >= vocab()) throw Error(ErrorCode::MalformedRecord, "word id out of range: " + std::to_string(word));
  }

  static void upsert(std::vector<WordProb>& row, WordProb v) {
    auto it = std::lower_bound(row.begin(), row.end(), v.word,
                               [](const WordProb& a, WordId w) { return a.word < w; });
    if (it != row.end() && it->word == v.word) {
      it->prob = v.prob;
    } else {
      row.insert(it, v);
    }
  }

  static void upsert(SparseTopics& col, TopicWeight v) {
    auto it = std::lower_bound(col.begin(), col.end(), v.topic,
                               [](const TopicWeight& a, TopicId t) { return a.topic < t; });
    if (it != col.end() && it->topic == v.topic) {
      it->weight = v.weight;
    } else {
      col.insert(it, v);
    }
  }

  std::vector<std::vector<WordProb>> rows_;
  std::vector<SparseTopics> columns_;
};

/// Additive folding of a bag of words onto topics: weight_i ∝ Σ_w count(w)·p_i(w),
/// normalised, entries below `drop_below` removed and the rest renormalised.
/// Throws NoTopicMass when no word carries probability on any topic.
inline SparseTopics fold_words(std::span<const WordCount> words, const TopicModel& model,
                               double drop_below = 1e-6) {
  std::vector<double> acc(static_cast<std::size_t>(model.topics()), 0.0);
  for (const auto& wc : words) {
    for (const auto& tw : model.word_topics(wc.word)) acc[tw.topic] += wc.count * tw.weight;
  }
  double total = 0.0;
  for (double v : acc) total += v;
  if (!(total > 0.0)) throw Error(ErrorCode::NoTopicMass, "no keyword has probability on any topic");

  SparseTopics out;
  double kept = 0.0;
  for (TopicId t = 0; t < model.topics(); ++t) {
    double v = acc[t] / total;
    if (v >= drop_below) {
      out.push_back({t, acc[t]});
      kept += acc[t];
    }
  }
  for (auto& tw : out) tw.weight /= kept;
  return out;
}

/// Query vector for a keyword list. Repeated keywords count with multiplicity.
inline QueryVector infer_query_vector(std::span<const WordId> keywords, const TopicModel& model) {
  if (keywords.empty()) throw Error(ErrorCode::InvalidQuery, "keyword list is empty");
  std::vector<WordCount> bag;
  bag.reserve(keywords.size());
  for (WordId w : keywords) bag.push_back({w, 1});
  return QueryVector::normalized(fold_words(bag, model));
}

}  // namespace ksir
