#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ksir/topic_model.hpp"
#include "ksir/types.hpp"

namespace ksir {

using json = nlohmann::json;

namespace detail {

inline const json& require(const json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end() || it->is_null()) throw Error(ErrorCode::MalformedRecord, std::string("missing field '") + key + "'");
  return *it;
}

inline std::int64_t as_int(const json& v, const char* what) {
  if (!v.is_number_integer()) throw Error(ErrorCode::MalformedRecord, std::string(what) + " must be an integer");
  return v.get<std::int64_t>();
}

inline const json& as_pair(const json& v, const char* what) {
  if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::MalformedRecord, std::string(what) + " entries must be [id, value] pairs");
  return v;
}

}  // namespace detail

/// Topic sums may drift this far from one before a record is rejected.
inline constexpr double kTopicSumDrift = 1e-3;

/// Builds a validated Element from one decoded ingestion record.
///
/// When the record has no "topics" field the distribution is folded from the
/// element's words with `fallback` (MalformedRecord if no model is given).
/// A model, when present, also bounds topic ids.
inline Element validate_element(const json& raw, const TopicModel* fallback = nullptr) {
  using detail::as_int;
  if (!raw.is_object()) throw Error(ErrorCode::MalformedRecord, "record is not an object");

  Element e;
  e.id = as_int(detail::require(raw, "id"), "id");
  e.ts = as_int(detail::require(raw, "ts"), "ts");

  const json& words = detail::require(raw, "words");
  if (!words.is_array()) throw Error(ErrorCode::MalformedRecord, "words must be an array");
  for (const auto& w : words) {
    const auto& pair = detail::as_pair(w, "words");
    auto word = as_int(pair[0], "word id");
    auto count = as_int(pair[1], "word frequency");
    if (word < 0) throw Error(ErrorCode::MalformedRecord, "negative word id");
    if (count < 1) throw Error(ErrorCode::MalformedRecord, "word frequency must be >= 1");
    if (fallback && word >= fallback->vocab()) throw Error(ErrorCode::MalformedRecord, "word id outside vocabulary");
    e.words.push_back({static_cast<WordId>(word), static_cast<std::int32_t>(count)});
  }
  std::sort(e.words.begin(), e.words.end(), [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
  for (std::size_t i = 1; i < e.words.size(); ++i) {
    if (e.words[i].word == e.words[i - 1].word) throw Error(ErrorCode::MalformedRecord, "duplicate word id");
  }

  const json& refs = detail::require(raw, "refs");
  if (!refs.is_array()) throw Error(ErrorCode::MalformedRecord, "refs must be an array");
  for (const auto& r : refs) {
    auto ref = as_int(r, "ref");
    if (ref == e.id) throw Error(ErrorCode::BadReference, "element " + std::to_string(e.id) + " refers to itself");
    e.refs.push_back(ref);
  }
  std::sort(e.refs.begin(), e.refs.end());
  e.refs.erase(std::unique(e.refs.begin(), e.refs.end()), e.refs.end());

  auto topics_it = raw.find("topics");
  if (topics_it == raw.end() || topics_it->is_null()) {
    if (!fallback) throw Error(ErrorCode::MalformedRecord, "missing field 'topics' and no topic model to infer it");
    e.topics = fold_words(e.words, *fallback);
    return e;
  }
  if (!topics_it->is_array()) throw Error(ErrorCode::MalformedRecord, "topics must be an array");
  double sum = 0.0;
  for (const auto& t : *topics_it) {
    const auto& pair = detail::as_pair(t, "topics");
    auto topic = as_int(pair[0], "topic id");
    if (!pair[1].is_number()) throw Error(ErrorCode::MalformedRecord, "topic probability must be a number");
    double p = pair[1].get<double>();
    if (topic < 0) throw Error(ErrorCode::MalformedRecord, "negative topic id");
    if (fallback && topic >= fallback->topics()) throw Error(ErrorCode::MalformedRecord, "topic id outside model");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidProbability, "topic probability outside [0,1]");
    sum += p;
    if (p > 0.0) e.topics.push_back({static_cast<TopicId>(topic), p});
  }
  std::sort(e.topics.begin(), e.topics.end(), [](const TopicWeight& a, const TopicWeight& b) { return a.topic < b.topic; });
  for (std::size_t i = 1; i < e.topics.size(); ++i) {
    if (e.topics[i].topic == e.topics[i - 1].topic) throw Error(ErrorCode::MalformedRecord, "duplicate topic id");
  }
  if (std::abs(sum - 1.0) > kTopicSumDrift) {
    throw Error(ErrorCode::InvalidProbability, "topic probabilities sum to " + std::to_string(sum));
  }
  // Leave already-normalised vectors untouched so records round-trip exactly.
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& tw : e.topics) tw.weight /= sum;
  }
  return e;
}

/// Fields in record order: id, ts, words, refs, topics.
inline nlohmann::ordered_json to_json(const Element& e) {
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& wc : e.words) words.push_back({wc.word, wc.count});
  nlohmann::ordered_json topics = nlohmann::ordered_json::array();
  for (const auto& tw : e.topics) topics.push_back({tw.topic, tw.weight});
  return nlohmann::ordered_json{{"id", e.id}, {"ts", e.ts}, {"words", std::move(words)}, {"refs", e.refs}, {"topics", std::move(topics)}};
}

inline std::string serialize(const Element& e) { return to_json(e).dump(); }

inline Element parse_element(const std::string& line, const TopicModel* fallback = nullptr) {
  json raw;
  try {
    raw = json::parse(line);
  } catch (const json::parse_error& ex) {
    throw Error(ErrorCode::MalformedRecord, ex.what());
  }
  return validate_element(raw, fallback);
}

/// Reads a line-delimited element stream. Blank lines are skipped; errors carry the line number.
inline std::vector<Element> read_stream(std::istream& in, const TopicModel* fallback = nullptr) {
  std::vector<Element> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_element(line, fallback));
    } catch (const Error& ex) {
      throw Error(ex.code(), "line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<Element> read_stream(const std::string& path, const TopicModel* fallback = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open element stream " + path);
  return read_stream(in, fallback);
}

inline void write_stream(std::ostream& out, std::span<const Element> elements) {
  for (const auto& e : elements) out << serialize(e) << '\n';
}

/// word id <-> surface form sidecar ("word_id surface_form" per line).
class Dictionary {
 public:
  static Dictionary parse(std::istream& in) {
    Dictionary d;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      long long id = 0;
      std::string surface;
      if (!(ls >> id >> surface)) continue;
      d.by_id_[static_cast<WordId>(id)] = surface;
      d.by_surface_[surface] = static_cast<WordId>(id);
    }
    return d;
  }

  static Dictionary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open dictionary " + path);
    return parse(in);
  }

  std::optional<WordId> find(const std::string& surface) const {
    auto it = by_surface_.find(surface);
    if (it == by_surface_.end()) return std::nullopt;
    return it->second;
  }

  std::string surface(WordId id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? std::to_string(id) : it->second;
  }

  std::size_t size() const { return by_id_.size(); }

 private:
  std::unordered_map<WordId, std::string> by_id_;
  std::unordered_map<std::string, WordId> by_surface_;
};

}  // namespace ksir
