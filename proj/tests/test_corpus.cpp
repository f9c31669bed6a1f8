#include <cmath>
#include <fstream>
#include <set>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/corpus/corpus.hpp"
#include "frforge/corpus/dataset.hpp"
#include "frforge/corpus/vocab.hpp"
#include "frforge/nlu/types.hpp"

using namespace frforge;
using namespace frforge::corpus;

namespace {

nlu::RoutingRecord record(const std::string& id, int true_domain, int routed) {
  nlu::RoutingRecord r;
  r.utterance = {id, {"w" + std::to_string(true_domain), "x"}, true_domain, 0};
  r.nbest = fixtures::nbest({{routed, 0.7}, {routed == 0 ? 1 : 0, 0.3}});
  r.routed_domain = routed;
  return r;
}

// 100 false rejects, 400 accepted target records, 3000 correct rejections.
std::vector<nlu::RoutingRecord> synthetic_logs() {
  std::vector<nlu::RoutingRecord> logs;
  for (int i = 0; i < 100; ++i) logs.push_back(record("f" + std::to_string(i), 0, 1 + i % 3));
  for (int i = 0; i < 400; ++i) logs.push_back(record("a" + std::to_string(i), 0, 0));
  for (int i = 0; i < 3000; ++i) logs.push_back(record("r" + std::to_string(i), 1 + i % 3, 1 + i % 3));
  return logs;
}

std::size_t count_fr(const std::vector<LabeledExample>& v) {
  std::size_t n = 0;
  for (const auto& e : v) n += e.label_fr;
  return n;
}

}  // namespace

TEST_CASE("default spec") {
  const auto spec = default_corpus_spec();
  CHECK_NOTHROW(validate(spec));
  CHECK(spec.num_domains() == 8);
  CHECK(spec.domains[static_cast<std::size_t>(spec.target_domain)].traffic_share < 0.005);
  double total = 0;
  for (const auto& d : spec.domains) total += d.traffic_share;
  CHECK(std::abs(total - 1.0) <= 1e-9);
  CHECK(corpus_spec_from_json(corpus_spec_to_json(spec)).num_domains() == 8);
}

TEST_CASE("spec validation") {
  auto spec = default_corpus_spec();
  SUBCASE("shares must sum to one") {
    spec.domains[1].traffic_share += 0.01;
    CHECK_THROWS_AS(validate(spec), ConfigError);
  }
  SUBCASE("target share below half a percent") {
    spec.domains[0].traffic_share = 0.006;
    spec.domains[1].traffic_share -= 0.002;
    CHECK_THROWS_AS(validate(spec), ConfigError);
  }
  SUBCASE("some non-target overlap") {
    for (std::size_t d = 1; d < spec.domains.size(); ++d) spec.domains[d].overlap_coefficient = 0.0;
    CHECK_THROWS_AS(validate(spec), ConfigError);
  }
  SUBCASE("unknown keys are rejected") {
    auto j = corpus_spec_to_json(spec);
    j["domains"][0]["colour"] = "red";
    CHECK_THROWS_AS(corpus_spec_from_json(j), ConfigError);
  }
}

TEST_CASE("corpus generation") {
  const auto spec = default_corpus_spec();
  const auto a = generate_corpus(spec, 10000, 7);
  const auto b = generate_corpus(spec, 10000, 7);
  CHECK(a == b);
  CHECK(a.size() == 10000);
  std::set<std::string> ids;
  std::size_t target = 0;
  for (const auto& u : a) {
    ids.insert(u.id);
    CHECK_FALSE(u.text.empty());
    CHECK(u.true_domain >= 0);
    CHECK(u.true_domain < 8);
    target += u.true_domain == spec.target_domain;
  }
  CHECK(ids.size() == a.size());
  const double mean = 10000 * 0.004;
  const double sd = std::sqrt(10000 * 0.004 * 0.996);
  CHECK(std::abs(static_cast<double>(target) - mean) <= 3 * sd);
  CHECK(generate_corpus(spec, 100, 8) != generate_corpus(spec, 100, 7));
  CHECK_THROWS_AS(generate_corpus(spec, 0, 7), ConfigError);
  CHECK_THROWS_AS(generate_corpus(spec, 7, 7), ConfigError);
}

TEST_CASE("corpus files round trip") {
  fixtures::TempDir dir("corpus");
  const auto c = generate_corpus(default_corpus_spec(), 50, 1);
  write_corpus(dir / "c.jsonl", c);
  CHECK(read_corpus(dir / "c.jsonl") == c);
  CHECK(tokenize("  Play  the Music ") == std::vector<std::string>{"play", "the", "music"});
}

TEST_CASE("false-reject dataset protocol") {
  DatasetConfig cfg;
  cfg.seed = 4;
  const auto split = build_fr_dataset(synthetic_logs(), 0, cfg);
  const auto total = split.size();
  const auto fr = count_fr(split.train) + count_fr(split.valid);
  CHECK(fr == 100);
  CHECK(total - fr == 1500);
  CHECK(total == 1600);
  CHECK(split.valid.size() == 240);
  const double valid_fr = static_cast<double>(count_fr(split.valid));
  CHECK(std::abs(valid_fr - 0.15 * 100) <= 1.0);
  const double f_train = static_cast<double>(count_fr(split.train)) / static_cast<double>(split.train.size());
  const double f_valid = valid_fr / static_cast<double>(split.valid.size());
  CHECK(std::abs(f_train - f_valid) < 1.0 / static_cast<double>(split.valid.size()));
  std::size_t accepted = 0;
  for (const auto* part : {&split.train, &split.valid}) {
    for (const auto& e : *part) {
      CHECK(e.label_domain == (e.utterance.true_domain == 0));
      CHECK(e.label_fr == (e.utterance.true_domain == 0 && e.routed_domain != 0));
      accepted += e.label_domain && !e.label_fr;
    }
  }
  CHECK(accepted == 150);
  CHECK(build_fr_dataset(synthetic_logs(), 0, cfg) == split);
}

TEST_CASE("dataset errors") {
  DatasetConfig cfg;
  std::vector<nlu::RoutingRecord> no_fr;
  for (int i = 0; i < 50; ++i) no_fr.push_back(record("r" + std::to_string(i), 1, 1));
  CHECK_THROWS_AS(build_fr_dataset(no_fr, 0, cfg), EmptyDatasetError);
  auto few = synthetic_logs();
  few.resize(600);
  try {
    build_fr_dataset(few, 0, cfg);
    FAIL("expected RatioInfeasibleError");
  } catch (const RatioInfeasibleError& e) {
    CHECK(e.achievable_ratio() < 15.0);
    CHECK(e.achievable_ratio() > 0.0);
  }
}

TEST_CASE("dataset files") {
  fixtures::TempDir dir("dataset");
  DatasetConfig cfg;
  const auto split = build_fr_dataset(synthetic_logs(), 0, cfg);
  write_dataset(dir.path(), split);
  CHECK(read_dataset(dir.path()) == split);

  SUBCASE("truncated final line") {
    const auto text = read_text_file(dir / "dataset.valid.jsonl");
    write_text_file(dir / "cut.jsonl", text.substr(0, text.size() - 20));
    try {
      read_examples(dir / "cut.jsonl");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == split.valid.size());
    }
  }
  SUBCASE("empty file") {
    write_text_file(dir / "empty.jsonl", "");
    CHECK(read_examples(dir / "empty.jsonl").empty());
  }
  SUBCASE("inconsistent labels") {
    auto j = labeled_example_to_json(split.train.front());
    j["label_fr"] = 1 - j["label_fr"].get<int>();
    write_text_file(dir / "bad.jsonl", j.dump() + "\n");
    CHECK_THROWS_AS(read_examples(dir / "bad.jsonl"), ParseError);
  }
}

TEST_CASE("vocabulary") {
  const auto v = Vocabulary::build({{"b", "a"}, {"c", "a"}});
  CHECK(v.size() == kNumReserved + 3);
  CHECK(v.id("a") == kNumReserved);
  CHECK(v.id("zzz") == kUnkId);
  CHECK(v.encode({"c", "q"}) == std::vector<int>{kNumReserved + 2, kUnkId});
  const auto e = v.extended({{"d", "a"}});
  CHECK(e.id("a") == v.id("a"));
  CHECK(e.id("d") == v.size());
  fixtures::TempDir dir("vocab");
  v.save(dir / "v.txt");
  CHECK(Vocabulary::load(dir / "v.txt") == v);
  CHECK(Vocabulary::load(dir / "v.txt").digest() == v.digest());
}
