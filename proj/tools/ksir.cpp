#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ksir/harness/bench.hpp"
#include "ksir/harness/generator.hpp"
#include "ksir/ksir.hpp"

namespace fs = std::filesystem;
using namespace ksir;

namespace {

// Inputs shared by ingest, query and check: a config file plus overrides.
struct Inputs {
  std::string config;
  std::string stream;
  std::string model;
  std::string dict;
  double lambda = -1.0;
  double eta = -1.0;
  Timestamp window = -1;
  Timestamp bucket = -1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "key = value config (stream, model, lambda, eta, window, bucket)");
    cmd->add_option("--stream", stream, "element stream (JSON lines)");
    cmd->add_option("--model", model, "topic model file");
    cmd->add_option("--dict", dict, "word dictionary (defaults to dict.txt next to the stream)");
    cmd->add_option("--lambda", lambda, "semantic/influence trade-off");
    cmd->add_option("--eta", eta, "influence scale");
    cmd->add_option("--window", window, "window length T");
    cmd->add_option("--bucket", bucket, "bucket length L");
  }

  harness::BenchConfig resolve() const {
    harness::BenchConfig c = config.empty() ? harness::BenchConfig{} : harness::BenchConfig::load(config);
    if (!stream.empty()) c.stream_path = stream;
    if (!model.empty()) c.model_path = model;
    if (lambda >= 0.0) c.scoring.lambda = lambda;
    if (eta >= 0.0) c.scoring.eta = eta;
    if (window >= 0) c.scoring.window_len = window;
    if (bucket >= 0) c.scoring.bucket_len = bucket;
    if (c.stream_path.empty() || c.model_path.empty()) {
      throw Error(ErrorCode::InvalidConfig, "need --stream and --model (or a config naming them)");
    }
    c.scoring.validate();
    return c;
  }

  std::string dict_path(const harness::BenchConfig& c) const {
    if (!dict.empty()) return dict;
    auto guess = fs::path(c.stream_path).parent_path() / "dict.txt";
    return fs::exists(guess) ? guess.string() : std::string{};
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

// "0.5,0.5" (dense over topics 0..) or "0:0.5,3:0.5" (sparse).
QueryVector parse_vector(const std::string& text, TopicId topics) {
  SparseTopics weights;
  TopicId next = 0;
  for (const auto& part : split(text, ',')) {
    TopicId topic = next++;
    std::string value = part;
    if (auto colon = part.find(':'); colon != std::string::npos) {
      topic = static_cast<TopicId>(std::stol(part.substr(0, colon)));
      value = part.substr(colon + 1);
    }
    if (topic < 0 || topic >= topics) throw Error(ErrorCode::InvalidQuery, "topic " + std::to_string(topic) + " outside model");
    double w = 0.0;
    try {
      w = std::stod(value);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidQuery, "bad vector entry '" + part + "'");
    }
    weights.push_back({topic, w});
  }
  return QueryVector::normalized(std::move(weights));
}

std::vector<WordId> parse_keywords(const std::string& text, const Dictionary* dict) {
  std::vector<WordId> ids;
  for (const auto& kw : split(text, ',')) {
    if (dict) {
      if (auto id = dict->find(kw)) {
        ids.push_back(*id);
        continue;
      }
    }
    try {
      std::size_t used = 0;
      long long id = std::stoll(kw, &used);
      if (used != kw.size()) throw std::invalid_argument(kw);
      ids.push_back(static_cast<WordId>(id));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidQuery, "unknown keyword '" + kw + "'");
    }
  }
  if (ids.empty()) throw Error(ErrorCode::InvalidQuery, "no keywords given");
  return ids;
}

std::string join_ids(std::vector<ElementId> ids) {
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (ElementId id : ids) out += (out.empty() ? "e" : ",e") + std::to_string(id);
  return out.empty() ? "-" : out;
}

int cmd_gen(const harness::GenParams& p, const std::string& out_dir) {
  auto syn = harness::generate(p);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "stream.jsonl");
    write_stream(out, syn.stream);
  }
  {
    std::ofstream out(fs::path(out_dir) / "model.txt");
    syn.model.write(out);
  }
  {
    std::ofstream out(fs::path(out_dir) / "dict.txt");
    for (WordId w = 0; w < p.m; ++w) out << w << " w" << w << '\n';
  }
  {
    json meta{{"n", p.n},          {"z", p.z},
              {"m", p.m},          {"skew", p.skew},
              {"ref_prob", p.ref_prob}, {"max_refs", p.max_refs},
              {"copy_prob", p.copy_prob}, {"recency", p.recency},
              {"copy_memory", p.copy_memory}, {"rate", p.rate},
              {"min_words", p.min_words}, {"max_words", p.max_words},
              {"seed", p.seed}};
    std::ofstream out(fs::path(out_dir) / "meta.json");
    out << meta.dump(2) << '\n';
  }
  std::cout << "wrote " << syn.stream.size() << " elements, " << p.z << " topics, " << p.m << " words to " << out_dir
            << '\n';
  return 0;
}

int cmd_ingest(const Inputs& in) {
  auto cfg = in.resolve();
  TopicModel model = TopicModel::load(cfg.model_path);
  auto stream = read_stream(cfg.stream_path, &model);
  const std::size_t n = stream.size();
  harness::Replayer replay(std::move(stream));
  StreamIndex index(model, cfg.scoring, replay.aligned_start(cfg.scoring.bucket_len));
  double total = 0.0, worst = 0.0;
  std::size_t buckets = 0;
  while (!replay.done()) {
    auto b = replay.step(index);
    total += b.elapsed_ms;
    worst = std::max(worst, b.elapsed_ms);
    ++buckets;
  }
  std::cout << "elements " << n << "\nbuckets " << buckets << "\nnow " << index.now() << "\nactive "
            << index.store().active_count() << "\nwindow " << index.store().window_count()
            << "\nupdate_ms_per_element " << (n ? total / static_cast<double>(n) : 0.0) << "\nmax_bucket_ms " << worst
            << '\n';
  return 0;
}

struct QueryArgs {
  Timestamp at = -1;
  std::size_t k = 10;
  double epsilon = 0.1;
  std::string engine = "mttd";
  std::string keywords;
  std::string vector;
  bool as_json = false;
};

int cmd_query(const Inputs& in, const QueryArgs& a) {
  auto cfg = in.resolve();
  TopicModel model = TopicModel::load(cfg.model_path);

  Query q;
  q.k = a.k;
  q.epsilon = a.epsilon;
  if (a.keywords.empty() == a.vector.empty()) throw Error(ErrorCode::InvalidQuery, "give exactly one of --keywords, --vector");
  if (!a.vector.empty()) {
    q.x = parse_vector(a.vector, model.topics());
  } else {
    Dictionary dict;
    const std::string dpath = in.dict_path(cfg);
    if (!dpath.empty()) dict = Dictionary::load(dpath);
    q.x = infer_query_vector(parse_keywords(a.keywords, dpath.empty() ? nullptr : &dict), model);
  }
  if (!(q.epsilon > 0.0 && q.epsilon < 1.0)) throw Error(ErrorCode::InvalidQuery, "epsilon must lie in (0,1)");
  if (q.k == 0 && a.engine != "bruteforce") throw Error(ErrorCode::InvalidQuery, "k must be positive");

  auto stream = read_stream(cfg.stream_path, &model);
  harness::Replayer replay(std::move(stream));
  StreamIndex index(model, cfg.scoring, replay.aligned_start(cfg.scoring.bucket_len));
  const Timestamp at = a.at >= 0 ? a.at : replay.last_ts();
  replay.advance_to(index, at);

  QueryResult r = harness::run_engine(a.engine, index, q);
  if (a.as_json) {
    std::cout << json{{"engine", r.engine},      {"at", index.now()},       {"active", index.store().active_count()},
                      {"members", r.members},    {"score", r.score},        {"evaluated", r.evaluated},
                      {"elapsed_ms", r.elapsed_ms}}
                     .dump()
              << '\n';
    return 0;
  }
  std::cout << "engine " << r.engine << "\nat " << index.now();
  if (index.now() != at) std::cout << " (bucket end for " << at << ")";
  std::cout << "\nactive " << index.store().active_count() << "\nmembers " << join_ids(r.members) << "\nscore "
            << std::fixed << std::setprecision(6) << r.score << std::defaultfloat << "\nevaluated " << r.evaluated
            << "\nelapsed_ms " << r.elapsed_ms << '\n';
  return 0;
}

int cmd_bench(const std::string& config, const std::string& output, long long queries, long long seed) {
  auto cfg = harness::BenchConfig::load(config);
  if (!output.empty()) cfg.output_dir = output;
  if (queries >= 0) cfg.queries = static_cast<std::size_t>(queries);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (cfg.output_dir.empty()) throw Error(ErrorCode::InvalidConfig, "no output directory (config 'output' or --output)");
  auto report = harness::run_bench(cfg);
  report.write(cfg.output_dir);

  std::cout << "elements " << report.elements << "  update_ms_per_element " << report.update_ms_per_element
            << "  mean_active " << report.mean_active << "  mean_R/I " << report.mean_semantic_influence_ratio << '\n';
  std::cout << std::left << std::setw(12) << "engine" << std::setw(12) << "mean_ms" << std::setw(12) << "median_ms"
            << std::setw(14) << "score/celf" << "eval_ratio\n";
  for (const auto& s : report.engines) {
    std::cout << std::setw(12) << s.engine << std::setw(12) << s.mean_ms << std::setw(12) << s.median_ms
              << std::setw(14) << s.mean_score_ratio << s.mean_evaluated_ratio << '\n';
  }
  std::cout << "report written to " << cfg.output_dir << '\n';
  return 0;
}

// Replays the stream checking the ranked lists after every bucket, then checks
// cached candidate scores against from-scratch evaluation on a few queries.
int cmd_check(const Inputs& in, std::size_t queries, std::uint64_t seed) {
  auto cfg = in.resolve();
  TopicModel model = TopicModel::load(cfg.model_path);
  auto stream = read_stream(cfg.stream_path, &model);
  harness::Replayer replay(std::move(stream));
  StreamIndex index(model, cfg.scoring, replay.aligned_start(cfg.scoring.bucket_len));

  bool ok = true;
  std::size_t buckets = 0;
  double drift = 0.0;
  while (!replay.done()) {
    replay.step(index);
    ++buckets;
    auto report = index.integrity_check();
    drift = std::max(drift, report.max_drift);
    if (!report.ok()) {
      ok = false;
      std::cout << "FAIL ranked lists at t=" << index.now() << ": "
                << (report.details.empty() ? std::string("drift") : report.details.front()) << '\n';
      break;
    }
  }
  if (ok) std::cout << "PASS ranked lists consistent over " << buckets << " buckets (max drift " << drift << ")\n";

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<WordId> word(0, model.vocab() - 1);
  std::size_t checked = 0, bad = 0;
  for (std::size_t i = 0; i < queries && index.store().active_count() > 0; ++i) {
    Query q;
    q.k = 1 + rng() % 10;
    try {
      q.x = infer_query_vector(std::vector<WordId>{word(rng), word(rng)}, model);
    } catch (const Error&) {
      continue;
    }
    for (const char* engine : {"mtts", "mttd", "celf"}) {
      auto r = harness::run_engine(engine, index, q);
      std::vector<const Element*> set;
      for (ElementId id : r.members) set.push_back(index.store().find(id));
      double fresh = total_score(std::span<const Element* const>(set), q.x, index.context(), index.store());
      ++checked;
      if (std::abs(fresh - r.score) > 1e-9 * std::max(1.0, fresh) || r.members.size() > q.k) {
        ++bad;
        std::cout << "FAIL " << engine << " cached score " << r.score << " vs " << fresh << '\n';
      }
    }
  }
  if (bad == 0) std::cout << "PASS cached scores match from-scratch evaluation (" << checked << " results)\n";
  return ok && bad == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-SIR stream index: generate, ingest and query referenced text streams"};
  app.require_subcommand(1);

  harness::GenParams gp;
  std::string gen_out = "synthetic";
  auto* gen = app.add_subcommand("gen", "write a synthetic skewed stream, topic model and dictionary");
  gen->add_option("-o,--out", gen_out, "output directory");
  gen->add_option("-n,--elements", gp.n, "element count");
  gen->add_option("-z,--topics", gp.z, "topic count");
  gen->add_option("-m,--vocab", gp.m, "vocabulary size");
  gen->add_option("-s,--skew", gp.skew, "Zipf exponent");
  gen->add_option("--ref-prob", gp.ref_prob, "probability an element has references");
  gen->add_option("--max-refs", gp.max_refs, "maximum references per element");
  gen->add_option("--copy-prob", gp.copy_prob, "probability a reference copies an earlier one");
  gen->add_option("--recency", gp.recency, "mean look-back of fresh references, in elements");
  gen->add_option("--rate", gp.rate, "elements per time unit");
  gen->add_option("--seed", gp.seed, "random seed");

  Inputs ingest_in;
  auto* ingest = app.add_subcommand("ingest", "validate and replay a stream, reporting update times");
  ingest_in.add_to(ingest);

  Inputs query_in;
  QueryArgs qa;
  auto* query = app.add_subcommand("query", "answer one query at a point of the stream");
  query_in.add_to(query);
  query->add_option("--at", qa.at, "query time (default: end of stream)");
  query->add_option("-k,--k", qa.k, "result size");
  query->add_option("-e,--epsilon", qa.epsilon, "approximation parameter in (0,1)");
  query->add_option("--engine", qa.engine, "mtts, mttd, celf, sieve, topk or bruteforce");
  query->add_option("--keywords", qa.keywords, "comma-separated keywords (dictionary words or ids)");
  query->add_option("--vector", qa.vector, "topic weights: dense '0.5,0.5' or sparse '0:0.5,3:0.5'");
  query->add_flag("--json", qa.as_json, "print one JSON line");

  std::string bench_config, bench_out;
  long long bench_queries = -1, bench_seed = -1;
  auto* bench = app.add_subcommand("bench", "run a benchmark configuration and write a metrics report");
  bench->add_option("config", bench_config, "benchmark config file")->required();
  bench->add_option("-o,--output", bench_out, "report directory");
  bench->add_option("--queries", bench_queries, "override query count");
  bench->add_option("--seed", bench_seed, "override query seed");

  Inputs check_in;
  std::size_t check_queries = 20;
  std::uint64_t check_seed = 1;
  auto* check = app.add_subcommand("check", "replay a stream verifying index integrity and cached scores");
  check_in.add_to(check);
  check->add_option("--queries", check_queries, "random queries for the score check");
  check->add_option("--seed", check_seed, "query seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(gp, gen_out);
    if (*ingest) return cmd_ingest(ingest_in);
    if (*query) return cmd_query(query_in, qa);
    if (*bench) return cmd_bench(bench_config, bench_out, bench_queries, bench_seed);
    if (*check) return cmd_check(check_in, check_queries, check_seed);
  } catch (const Error& ex) {
    std::cerr << json{{"error", to_string(ex.code())}, {"message", ex.what()}}.dump() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << json{{"error", "Internal"}, {"message", ex.what()}}.dump() << '\n';
    return 3;
  }
  return 0;
}
