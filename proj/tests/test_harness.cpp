#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "ksir/harness/bench.hpp"
#include "ksir/harness/generator.hpp"
#include "support/oracle.hpp"

using namespace ksir;

namespace {

std::string dump(const harness::Synthetic& syn) {
  std::ostringstream out;
  write_stream(out, syn.stream);
  syn.model.write(out);
  return out.str();
}

harness::BenchConfig toy_config() {
  auto cfg = harness::BenchConfig::load(oracle::fixture_path("config.txt"));
  cfg.output_dir.clear();
  return cfg;
}

}  // namespace

TEST(Generator, SameSeedSameBytes) {
  harness::GenParams p;
  p.seed = 42;
  EXPECT_EQ(dump(harness::generate(p)), dump(harness::generate(p)));
  p.seed = 43;
  harness::GenParams q;
  q.seed = 42;
  EXPECT_NE(dump(harness::generate(p)), dump(harness::generate(q)));
}

TEST(Generator, ExactCountAndValidRecords) {
  auto syn = harness::generate({.n = 1000});
  ASSERT_EQ(syn.stream.size(), 1000u);
  EXPECT_NO_THROW(syn.model.validate());
  double topics = 0.0;
  for (std::size_t i = 0; i < syn.stream.size(); ++i) {
    const Element& e = syn.stream[i];
    EXPECT_EQ(parse_element(serialize(e)), e);
    if (i > 0) EXPECT_GE(e.ts, syn.stream[i - 1].ts);
    for (ElementId r : e.refs) EXPECT_LT(syn.stream[static_cast<std::size_t>(r - 1)].ts, e.ts);
    topics += static_cast<double>(e.topics.size());
  }
  EXPECT_LT(topics / 1000.0, 2.0);
}

TEST(Generator, RejectsBadParameters) {
  EXPECT_THROW(harness::generate({.n = 0}), Error);
  EXPECT_THROW(harness::generate({.skew = -1.0}), Error);
  EXPECT_THROW(harness::generate({.min_words = 5, .max_words = 2}), Error);
}

TEST(Generator, DefaultSkewConcentratesScoreMass) {
  auto syn = harness::generate({.n = 100000, .seed = 42});
  StreamIndex index(syn.model, ScoringConfig{0.5, 0.5, 2000, 100});
  harness::Replayer(syn.stream).advance_to(index, 10000);
  EXPECT_GE(harness::top_score_share(index, 0.01), 0.30);
}

TEST(BenchConfig, ParsesKeyValues) {
  std::istringstream in(
      "# comment\nstream = s.jsonl\nmodel=m.txt\nlambda = 0.3\neta = 4\nwindow = 60\nbucket = 15\nk = 7\n"
      "engines = mtts, celf\nseed = 9  # trailing\n");
  auto c = harness::BenchConfig::parse(in);
  EXPECT_EQ(c.stream_path, "s.jsonl");
  EXPECT_EQ(c.model_path, "m.txt");
  EXPECT_DOUBLE_EQ(c.scoring.lambda, 0.3);
  EXPECT_DOUBLE_EQ(c.scoring.eta, 4.0);
  EXPECT_EQ(c.scoring.window_len, 60);
  EXPECT_EQ(c.scoring.bucket_len, 15);
  EXPECT_EQ(c.k_min, 7u);
  EXPECT_EQ(c.k_max, 7u);
  EXPECT_EQ(c.engines, (std::vector<std::string>{"mtts", "celf"}));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_NO_THROW(c.validate());
}

TEST(BenchConfig, RejectsBadInput) {
  std::istringstream unknown("colour = blue\n");
  EXPECT_THROW(harness::BenchConfig::parse(unknown), Error);
  std::istringstream garbage("just words\n");
  EXPECT_THROW(harness::BenchConfig::parse(garbage), Error);
  std::istringstream bad_number("k = many\n");
  EXPECT_THROW(harness::BenchConfig::parse(bad_number), Error);
  harness::BenchConfig c;
  c.engines = {"magic"};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.epsilon = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Bench, TableFixtureMttdMatchesBruteForce) {
  auto cfg = toy_config();
  auto report = harness::run_bench(cfg);
  ASSERT_EQ(report.records.size(), cfg.queries * cfg.engines.size());
  for (std::size_t q = 0; q < cfg.queries; ++q) {
    double brute = -1.0, mttd = -2.0;
    for (const auto& r : report.records) {
      if (r.query != q) continue;
      EXPECT_EQ(r.at, 8);
      if (r.engine == "bruteforce") brute = r.score;
      if (r.engine == "mttd") mttd = r.score;
      EXPECT_GT(r.score_ratio, 0.0);
      EXPECT_LE(r.score_ratio, 1.05);
    }
    EXPECT_NEAR(mttd / brute, 1.0, 1e-12);
  }
  EXPECT_EQ(report.elements, 8u);
}

TEST(Bench, ExampleQueryVectorsThroughEngines) {
  oracle::ToyIndex t;
  for (auto x : {oracle::qv({{0, 0.5}, {1, 0.5}}), oracle::qv({{0, 0.1}, {1, 0.9}})}) {
    Query q;
    q.k = 2;
    q.x = x;
    q.epsilon = 0.3;
    EXPECT_NEAR(harness::run_engine("mttd", t.index, q).score, harness::run_engine("bruteforce", t.index, q).score,
                1e-12);
  }
  EXPECT_THROW(harness::run_engine("nope", t.index, Query{}), Error);
}

TEST(Bench, ZeroQueriesReportsUpdatesOnly) {
  auto cfg = toy_config();
  cfg.queries = 0;
  auto report = harness::run_bench(cfg);
  EXPECT_TRUE(report.records.empty());
  EXPECT_EQ(report.elements, 8u);
  EXPECT_EQ(report.buckets.size(), 8u);
  EXPECT_GE(report.update_ms_per_element, 0.0);
}

TEST(Bench, ReproducibleAndWritesFiles) {
  auto syn = harness::generate({.n = 5000, .z = 10, .m = 800, .seed = 5});
  harness::BenchConfig cfg;
  cfg.scoring = ScoringConfig{0.5, 0.5, 200, 20};
  cfg.queries = 6;
  cfg.k_min = 3;
  cfg.k_max = 8;
  auto a = harness::run_bench(cfg, syn.model, syn.stream);
  auto b = harness::run_bench(cfg, syn.model, syn.stream);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].members, b.records[i].members);
    EXPECT_EQ(a.records[i].score, b.records[i].score);
    EXPECT_EQ(a.records[i].evaluated, b.records[i].evaluated);
    EXPECT_EQ(a.records[i].at % 20, 0);
    if (a.records[i].engine == "celf" || a.records[i].engine == "sieve") {
      EXPECT_EQ(a.records[i].evaluated, a.records[i].active);
    }
  }
  ASSERT_NE(a.summary("mttd"), nullptr);
  EXPECT_GT(a.summary("mttd")->mean_score_ratio, 0.9);

  auto dir = std::filesystem::temp_directory_path() / "ksir_bench_test";
  std::filesystem::remove_all(dir);
  a.write(dir.string());
  for (const char* f : {"records.jsonl", "summary.json", "records.tsv", "buckets.tsv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "summary.json");
  auto summary = json::parse(in);
  EXPECT_EQ(summary["seed"], cfg.seed);
  EXPECT_EQ(summary["engines"].size(), cfg.engines.size());
  std::filesystem::remove_all(dir);
}
