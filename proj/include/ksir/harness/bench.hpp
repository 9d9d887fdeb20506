#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ksir/baselines.hpp"
#include "ksir/engines.hpp"
#include "ksir/harness/replay.hpp"
#include "ksir/io.hpp"

namespace ksir::harness {

using json = nlohmann::json;

inline const std::vector<std::string>& known_engines() {
  static const std::vector<std::string> names{"mtts", "mttd", "celf", "sieve", "topk", "bruteforce"};
  return names;
}

inline QueryResult run_engine(const std::string& name, const StreamIndex& index, const Query& q) {
  if (name == "mtts") return query_mtts(index, q);
  if (name == "mttd") return query_mttd(index, q);
  if (name == "celf") return query_celf(index, q);
  if (name == "sieve") return query_sieve(index, q);
  if (name == "topk") return query_topk_rep(index, q);
  if (name == "bruteforce") return query_bruteforce(index, q);
  throw Error(ErrorCode::InvalidConfig, "unknown engine '" + name + "'");
}

/// Benchmark run description, read from "key = value" lines ('#' starts a comment).
struct BenchConfig {
  std::string stream_path;
  std::string model_path;
  std::string output_dir;
  ScoringConfig scoring{0.5, 0.5, 2000, 100};
  std::size_t queries = 20;
  std::size_t k_min = 10;
  std::size_t k_max = 10;
  double epsilon = 0.1;
  std::size_t keywords_min = 1;
  std::size_t keywords_max = 5;
  std::uint64_t seed = 7;
  std::vector<std::string> engines{"celf", "sieve", "topk", "mtts", "mttd"};
  Timestamp query_from = -1;  // earliest query time; -1 means once the first window has filled

  static BenchConfig parse(std::istream& in) {
    BenchConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + ": expected key = value");
      }
      try {
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + ": bad value");
      }
    }
    return c;
  }

  static BenchConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
    BenchConfig c = parse(in);
    // Relative input paths are taken relative to the config file.
    auto base = std::filesystem::path(path).parent_path();
    for (std::string* p : {&c.stream_path, &c.model_path, &c.output_dir}) {
      if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (key == "stream") stream_path = value;
    else if (key == "model") model_path = value;
    else if (key == "output") output_dir = value;
    else if (key == "lambda") scoring.lambda = std::stod(value);
    else if (key == "eta") scoring.eta = std::stod(value);
    else if (key == "window") scoring.window_len = std::stoll(value);
    else if (key == "bucket") scoring.bucket_len = std::stoll(value);
    else if (key == "queries") queries = std::stoul(value);
    else if (key == "k") k_min = k_max = std::stoul(value);
    else if (key == "k_min") k_min = std::stoul(value);
    else if (key == "k_max") k_max = std::stoul(value);
    else if (key == "epsilon") epsilon = std::stod(value);
    else if (key == "keywords_min") keywords_min = std::stoul(value);
    else if (key == "keywords_max") keywords_max = std::stoul(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "query_from") query_from = std::stoll(value);
    else if (key == "engines") {
      engines.clear();
      std::istringstream in(value);
      std::string name;
      while (std::getline(in, name, ',')) {
        if (!trim(name).empty()) engines.push_back(trim(name));
      }
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
  }

  void validate() const {
    scoring.validate();
    if (k_min == 0 || k_max < k_min) throw Error(ErrorCode::InvalidConfig, "need 0 < k_min <= k_max");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0,1)");
    if (keywords_min == 0 || keywords_max < keywords_min) {
      throw Error(ErrorCode::InvalidConfig, "need 0 < keywords_min <= keywords_max");
    }
    if (engines.empty()) throw Error(ErrorCode::InvalidConfig, "no engines configured");
    for (const auto& name : engines) {
      if (std::find(known_engines().begin(), known_engines().end(), name) == known_engines().end()) {
        throw Error(ErrorCode::InvalidConfig, "unknown engine '" + name + "'");
      }
    }
  }

  json to_json() const {
    return json{{"stream", stream_path},
                {"model", model_path},
                {"output", output_dir},
                {"lambda", scoring.lambda},
                {"eta", scoring.eta},
                {"window", scoring.window_len},
                {"bucket", scoring.bucket_len},
                {"queries", queries},
                {"k_min", k_min},
                {"k_max", k_max},
                {"epsilon", epsilon},
                {"keywords_min", keywords_min},
                {"keywords_max", keywords_max},
                {"seed", seed},
                {"engines", engines},
                {"query_from", query_from}};
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }
};

struct QueryRecord {
  std::size_t query;
  Timestamp at;
  std::size_t k;
  std::size_t active;  // n_t
  std::vector<WordId> keywords;
  std::string engine;
  std::vector<ElementId> members;
  double score;
  std::size_t evaluated;
  double evaluated_ratio;
  double elapsed_ms;
  double score_ratio;  // vs CELF on the same snapshot; negative when unavailable
};

struct EngineSummary {
  std::string engine;
  std::size_t runs = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double mean_score_ratio = -1.0;
  double mean_evaluated_ratio = 0.0;
  double mean_evaluated = 0.0;
};

struct MetricsReport {
  json header;
  std::vector<QueryRecord> records;
  std::vector<BucketTiming> buckets;
  std::vector<EngineSummary> engines;
  std::size_t elements = 0;
  double update_ms_per_element = 0.0;
  double max_bucket_ms = 0.0;
  double mean_active = 0.0;
  double mean_semantic_influence_ratio = -1.0;  // λR / ((1−λ)/η)·I of the reference results

  const EngineSummary* summary(const std::string& engine) const {
    for (const auto& s : engines) {
      if (s.engine == engine) return &s;
    }
    return nullptr;
  }

  json summary_json() const {
    json out = header;
    out["elements"] = elements;
    out["buckets"] = buckets.size();
    out["update_ms_per_element"] = update_ms_per_element;
    out["max_bucket_ms"] = max_bucket_ms;
    out["mean_active"] = mean_active;
    out["mean_semantic_influence_ratio"] = mean_semantic_influence_ratio;
    json per = json::array();
    for (const auto& s : engines) {
      per.push_back({{"engine", s.engine},
                     {"runs", s.runs},
                     {"mean_ms", s.mean_ms},
                     {"median_ms", s.median_ms},
                     {"mean_score_ratio", s.mean_score_ratio},
                     {"mean_evaluated_ratio", s.mean_evaluated_ratio},
                     {"mean_evaluated", s.mean_evaluated}});
    }
    out["engines"] = std::move(per);
    return out;
  }

  static json record_json(const QueryRecord& r) {
    return json{{"query", r.query},         {"at", r.at},
                {"k", r.k},                 {"active", r.active},
                {"keywords", r.keywords},   {"engine", r.engine},
                {"members", r.members},     {"score", r.score},
                {"evaluated", r.evaluated}, {"evaluated_ratio", r.evaluated_ratio},
                {"elapsed_ms", r.elapsed_ms}, {"score_ratio", r.score_ratio}};
  }

  /// Writes records.jsonl (header line first), summary.json, records.tsv and buckets.tsv into `dir`.
  void write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
      std::ofstream out(std::filesystem::path(dir) / name);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + (std::filesystem::path(dir) / name).string());
      return out;
    };
    {
      auto out = open("records.jsonl");
      out << json{{"header", header}}.dump() << '\n';
      for (const auto& r : records) out << record_json(r).dump() << '\n';
    }
    {
      auto out = open("summary.json");
      out << summary_json().dump(2) << '\n';
    }
    {
      auto out = open("records.tsv");
      out << "query\tat\tk\tactive\tengine\tscore\tevaluated\tevaluated_ratio\telapsed_ms\tscore_ratio\n";
      for (const auto& r : records) {
        out << r.query << '\t' << r.at << '\t' << r.k << '\t' << r.active << '\t' << r.engine << '\t' << r.score
            << '\t' << r.evaluated << '\t' << r.evaluated_ratio << '\t' << r.elapsed_ms << '\t' << r.score_ratio
            << '\n';
      }
    }
    {
      auto out = open("buckets.tsv");
      out << "now\telements\telapsed_ms\n";
      for (const auto& b : buckets) out << b.now << '\t' << b.elements << '\t' << b.elapsed_ms << '\n';
    }
  }
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// (λ·ΣxR, ((1−λ)/η)·ΣxI) of a result set.
inline std::pair<double, double> score_parts(const StreamIndex& index, const std::vector<ElementId>& ids,
                                             const QueryVector& x) {
  std::vector<const Element*> set;
  for (ElementId id : ids) set.push_back(index.store().find(id));
  const auto& cfg = index.config();
  double sem = 0.0, inf = 0.0;
  for (const auto& tw : x.entries()) {
    sem += tw.weight * semantic_score(set, tw.topic, index.model());
    inf += tw.weight * influence_score(std::span<const Element* const>(set), tw.topic, index.store());
  }
  return {cfg.semantic_coef() * sem, cfg.influence_coef() * inf};
}

}  // namespace detail

/// Share of the total single-element score mass δ(e,x) held by the top
/// `fraction` of active elements, for the uniform query over all topics.
inline double top_score_share(const StreamIndex& index, double fraction = 0.01) {
  const double weight = 1.0 / static_cast<double>(index.model().topics());
  std::vector<double> scores;
  double total = 0.0;
  for (const Element* e : index.store().active_elements()) {
    double d = 0.0;
    for (const auto& tw : e->topics) d += weight * index.lists().score(tw.topic, e->id);
    scores.push_back(d);
    total += d;
  }
  if (scores.empty() || total <= 0.0) return 0.0;
  const auto top = static_cast<std::size_t>(fraction * static_cast<double>(scores.size()));
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(top), scores.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) sum += scores[i];
  return sum / total;
}

/// Replays `stream` bucket by bucket and, at random bucket-aligned times, runs
/// every configured engine on the same snapshot. Query keywords are drawn
/// uniformly from the vocabulary.
inline MetricsReport run_bench(const BenchConfig& cfg, const TopicModel& model, std::vector<Element> stream) {
  cfg.validate();
  MetricsReport report;
  report.header = cfg.to_json();

  Replayer replay(std::move(stream));
  const Timestamp start = replay.aligned_start(cfg.scoring.bucket_len);
  StreamIndex index(model, cfg.scoring, start);
  const Timestamp last = replay.last_ts();
  const Timestamp from = cfg.query_from >= 0 ? cfg.query_from : start + cfg.scoring.window_len;

  std::mt19937_64 rng(cfg.seed);
  struct Planned {
    Timestamp at;
    std::size_t k;
    std::vector<WordId> keywords;
  };
  std::vector<Planned> plan;
  if (cfg.queries > 0 && last > 0) {
    std::uniform_int_distribution<Timestamp> when(std::min(from, last), last);
    std::uniform_int_distribution<std::size_t> kdist(cfg.k_min, cfg.k_max);
    std::uniform_int_distribution<std::size_t> kwcount(cfg.keywords_min, cfg.keywords_max);
    std::uniform_int_distribution<WordId> word(0, model.vocab() - 1);
    for (std::size_t i = 0; i < cfg.queries; ++i) {
      Planned p{when(rng), kdist(rng), {}};
      // Redraw keyword sets that carry no topic mass.
      for (int attempt = 0; attempt < 100 && p.keywords.empty(); ++attempt) {
        std::size_t n = kwcount(rng);
        for (std::size_t j = 0; j < n; ++j) p.keywords.push_back(word(rng));
        try {
          (void)infer_query_vector(p.keywords, model);
        } catch (const Error&) {
          p.keywords.clear();
        }
      }
      if (p.keywords.empty()) throw Error(ErrorCode::InvalidConfig, "could not draw a query with topic mass");
      plan.push_back(std::move(p));
    }
    std::stable_sort(plan.begin(), plan.end(), [](const Planned& a, const Planned& b) { return a.at < b.at; });
  }

  std::map<std::string, std::vector<double>> latency, ratio, eval_ratio, evaluated;
  double ri_sum = 0.0, active_sum = 0.0;
  std::size_t ri_count = 0;
  for (std::size_t qi = 0; qi < plan.size(); ++qi) {
    for (auto& b : replay.advance_to(index, plan[qi].at)) report.buckets.push_back(b);
    Query q;
    q.k = plan[qi].k;
    q.epsilon = cfg.epsilon;
    q.x = infer_query_vector(plan[qi].keywords, model);
    const std::size_t active = index.store().active_count();
    active_sum += static_cast<double>(active);

    std::vector<QueryResult> results;
    const QueryResult* reference = nullptr;
    for (const auto& name : cfg.engines) {
      try {
        results.push_back(run_engine(name, index, q));
      } catch (const Error& ex) {
        throw Error(ex.code(), "engine " + name + " at t=" + std::to_string(index.now()) + ": " + ex.what());
      }
    }
    for (const auto& r : results) {
      if (r.engine == "celf") reference = &r;
    }
    const QueryResult& parts_of = reference ? *reference : results.front();
    if (!parts_of.members.empty()) {
      auto [sem, inf] = detail::score_parts(index, parts_of.members, q.x);
      if (inf > 0.0) {
        ri_sum += sem / inf;
        ++ri_count;
      }
    }
    for (const auto& r : results) {
      QueryRecord rec{qi,
                      index.now(),
                      q.k,
                      active,
                      plan[qi].keywords,
                      r.engine,
                      r.members,
                      r.score,
                      r.evaluated,
                      active ? static_cast<double>(r.evaluated) / static_cast<double>(active) : 0.0,
                      r.elapsed_ms,
                      reference && reference->score > 0.0 ? r.score / reference->score : -1.0};
      latency[r.engine].push_back(rec.elapsed_ms);
      eval_ratio[r.engine].push_back(rec.evaluated_ratio);
      evaluated[r.engine].push_back(static_cast<double>(rec.evaluated));
      if (rec.score_ratio >= 0.0) ratio[r.engine].push_back(rec.score_ratio);
      report.records.push_back(std::move(rec));
    }
  }
  while (!replay.done()) report.buckets.push_back(replay.step(index));

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  for (const auto& name : cfg.engines) {
    EngineSummary s;
    s.engine = name;
    s.runs = latency[name].size();
    s.mean_ms = mean(latency[name]);
    s.median_ms = detail::median(latency[name]);
    s.mean_score_ratio = ratio[name].empty() ? -1.0 : mean(ratio[name]);
    s.mean_evaluated_ratio = mean(eval_ratio[name]);
    s.mean_evaluated = mean(evaluated[name]);
    report.engines.push_back(s);
  }
  double total_ms = 0.0;
  for (const auto& b : report.buckets) {
    report.elements += b.elements;
    total_ms += b.elapsed_ms;
    report.max_bucket_ms = std::max(report.max_bucket_ms, b.elapsed_ms);
  }
  report.update_ms_per_element = report.elements ? total_ms / static_cast<double>(report.elements) : 0.0;
  report.mean_active = plan.empty() ? 0.0 : active_sum / static_cast<double>(plan.size());
  report.mean_semantic_influence_ratio = ri_count ? ri_sum / static_cast<double>(ri_count) : -1.0;
  return report;
}

inline MetricsReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  TopicModel model = TopicModel::load(cfg.model_path);
  auto stream = read_stream(cfg.stream_path, &model);
  return run_bench(cfg, model, std::move(stream));
}

}  // namespace ksir::harness
