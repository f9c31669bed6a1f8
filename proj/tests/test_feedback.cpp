#include <cmath>
#include <regex>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/corpus/corpus.hpp"
#include "frforge/feedback/feedback.hpp"

using namespace frforge;
using namespace frforge::feedback;

namespace {

nlu::RoutingRecord pool_record(const std::string& id, int true_domain, int routed) {
  nlu::RoutingRecord r;
  r.utterance = {id, {"w"}, true_domain, 0};
  r.nbest = fixtures::nbest({{routed, 1.0}});
  r.routed_domain = routed;
  return r;
}

}  // namespace

TEST_CASE("verdict and source names") {
  CHECK(to_string(Verdict::fr) == "fr");
  CHECK(to_string(Verdict::not_fr) == "not_fr");
  CHECK(verdict_from_string("not_fr") == Verdict::not_fr);
  CHECK_THROWS_AS(verdict_from_string("maybe"), ContractError);
  CHECK(source_from_string("human") == Source::human);
  CHECK(std::regex_match(utc_timestamp(), std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
}

TEST_CASE("oracle reviewer") {
  std::vector<nlu::RoutingRecord> pool;
  std::vector<detector::ScoredRecord> candidates;
  for (int i = 0; i < 4000; ++i) {
    const bool fr = i % 2 == 0;
    pool.push_back(pool_record("p" + std::to_string(i), fr ? 0 : 2, 1));
    candidates.push_back({"p" + std::to_string(i), 1, 0.9, 0.9});
  }
  const auto exact = oracle_annotate(candidates, pool, 0, 0.0, 1);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    CHECK(exact[i].verdict == (i % 2 == 0 ? Verdict::fr : Verdict::not_fr));
    CHECK(exact[i].source == Source::oracle);
    CHECK_FALSE(exact[i].timestamp.has_value());
  }
  const double rate = 0.2;
  const auto noisy = oracle_annotate(candidates, pool, 0, rate, 1);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) flips += noisy[i].verdict != exact[i].verdict;
  const double n = static_cast<double>(candidates.size());
  CHECK(std::abs(static_cast<double>(flips) - n * rate) <= 3 * std::sqrt(n * rate * (1 - rate)));
  CHECK(oracle_annotate(candidates, pool, 0, rate, 1) == noisy);
  CHECK_THROWS_AS(oracle_annotate(candidates, pool, 0, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(oracle_annotate({{"missing", 1, 0.9, 0.9}}, pool, 0, 0.0, 1), ContractError);
}

TEST_CASE("enrichment factor") {
  // 30 of 100 candidates confirmed, 1% prevalence.
  CHECK(enrichment_factor(30, 100, 100, 10000) == doctest::Approx(30.0));
  CHECK(enrichment_factor(1, 100, 100, 10000) == doctest::Approx(1.0));
  CHECK_THROWS_AS(enrichment_factor(0, 0, 10, 100), ContractError);
  CHECK_THROWS_AS(enrichment_factor(0, 10, 0, 100), ContractError);

  // A random review list has expected enrichment 1.
  std::vector<int> is_fr(20000, 0);
  for (std::size_t i = 0; i < is_fr.size(); i += 50) is_fr[i] = 1;
  Rng rng(3);
  std::vector<double> factors;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t confirmed = 0;
    for (int k = 0; k < 500; ++k) confirmed += is_fr[rng.below(is_fr.size())];
    factors.push_back(enrichment_factor(confirmed, 500, 400, 20000));
  }
  double mean = 0;
  for (double f : factors) mean += f / static_cast<double>(factors.size());
  CHECK(std::abs(mean - 1.0) < 0.1);
}

TEST_CASE("annotation log") {
  fixtures::TempDir dir("annotations");
  const auto path = dir / "a.jsonl";
  CHECK(read_annotations(path).empty());
  const Annotation a{"x", Verdict::fr, Source::human, "2026-01-02T03:04:05Z"};
  const Annotation b{"y", Verdict::not_fr, Source::oracle, std::nullopt};
  append_annotations(path, {a});
  append_annotations(path, {b});
  CHECK(read_annotations(path) == std::vector<Annotation>{a, b});
  auto j = annotation_to_json(a);
  CHECK(j.at("verdict") == "fr");
  j["verdict"] = "FR";
  write_text_file(dir / "bad.jsonl", j.dump() + "\n");
  CHECK_THROWS_AS(read_annotations(dir / "bad.jsonl"), ParseError);
}

TEST_CASE("retraining on confirmed false rejects") {
  const auto spec = corpus::default_corpus_spec();
  const auto corpus = corpus::generate_corpus(spec, 10000, 7);
  const auto traffic = corpus::generate_corpus(spec, 100000, 8, "t");
  const auto heldout = corpus::generate_corpus(spec, 40000, 9, "h");
  nlu::ProductionTrainConfig pc;
  pc.seed = 5;
  const auto production = nlu::train_production_models(corpus, spec.num_domains(), pc);
  nlu::PerturbationConfig p;
  p.noise_sigma = 0.05;
  p.seed = 9;
  p.target_bias = nlu::calibrate_target_bias(production, traffic, p, 5, 0, 0.2).target_bias;
  std::vector<corpus::Utterance> confirmed;
  for (const auto& r : nlu::simulate(production, traffic, p, 5, 0)) {
    if (r.utterance.true_domain == 0 && r.routed_domain != 0) confirmed.push_back(r.utterance);
  }
  REQUIRE(confirmed.size() >= 50);

  RetrainConfig rc;
  rc.production = pc;
  const auto out = retrain_and_measure(production, corpus, confirmed, heldout, p, 5, 0, rc);
  CHECK(out.confirmed == confirmed.size());
  CHECK(out.heldout_fr_before > 0);
  CHECK(out.heldout_fr_before <= out.heldout_target);
  CHECK(out.heldout_fr_after < out.heldout_fr_before);
  CHECK(out.relative_reduction() == doctest::Approx(
                                        (static_cast<double>(out.heldout_fr_before) - out.heldout_fr_after) /
                                        static_cast<double>(out.heldout_fr_before)));
  CHECK(out.production_digest_before == production.digest());
  CHECK(out.production_digest_after != out.production_digest_before);

  rc.production.learning_rate = 0.0;
  const auto control = retrain_and_measure(production, corpus, confirmed, heldout, p, 5, 0, rc);
  CHECK(control.heldout_fr_after == control.heldout_fr_before);
  CHECK(control.relative_reduction() == 0.0);

  CHECK_THROWS_AS(retrain_and_measure(production, corpus, {}, heldout, p, 5, 0, rc), ContractError);
}
