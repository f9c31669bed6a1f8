#include <algorithm>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/detector/detector.hpp"

using namespace frforge;
using namespace frforge::detector;
using models::Head;
using models::ModelKind;

namespace {

// False rejects say "find episode"; everything else says "play song".
corpus::DatasetSplit toy_split(std::size_t n_train) {
  corpus::DatasetSplit s;
  for (std::size_t i = 0; i < n_train + 8; ++i) {
    const bool fr = i % 4 == 0;
    auto e = fixtures::example("e" + std::to_string(i), fr ? std::vector<std::string>{"find", "episode"}
                                                            : std::vector<std::string>{"play", "song"},
                               fr ? 0 : 1 + static_cast<int>(i % 3), 1 + static_cast<int>(i % 3),
                               fixtures::nbest({{1 + static_cast<int>(i % 3), 0.6}, {0, 0.4}}));
    (i < n_train ? s.train : s.valid).push_back(std::move(e));
  }
  return s;
}

corpus::Vocabulary toy_vocab() { return corpus::Vocabulary::build({{"find", "episode"}, {"play", "song"}}); }

ScoredRecord rec(const std::string& id, int routed, double pd, std::optional<double> pf) {
  return {id, routed, pd, pf};
}

}  // namespace

TEST_CASE("step count is epochs times ceil(train / batch)") {
  CHECK(planned_steps(37, 3, 8) == 15);
  CHECK(planned_steps(32, 2, 8) == 8);
  CHECK(planned_steps(1, 4, 32) == 4);
  const auto data = toy_split(37);
  const auto vocab = toy_vocab();
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.base_lr = 1e-3;
  std::int64_t calls = 0;
  std::int64_t last_step = 0;
  std::size_t max_batch = 0;
  const auto r = train(data, fixtures::tiny_model(ModelKind::transformer, vocab.size()), vocab, nullptr, tc,
                       [&](std::int64_t step, std::size_t batch, double) {
                         ++calls;
                         CHECK(step == last_step + 1);
                         last_step = step;
                         max_batch = std::max(max_batch, batch);
                       });
  CHECK(calls == 15);
  CHECK(r.steps == 15);
  CHECK(max_batch == 4);
  CHECK(r.log.size() == 3);
}

TEST_CASE("training separates a toy problem and is deterministic") {
  const auto data = toy_split(64);
  const auto vocab = toy_vocab();
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 8;
  tc.base_lr = 3e-3;
  tc.seed = 11;
  for (auto kind : {ModelKind::bilstm, ModelKind::transformer_nbest_multitask}) {
    INFO(models::to_string(kind));
    const auto cfg = fixtures::tiny_model(kind, vocab.size());
    const auto a = train(data, cfg, vocab, nullptr, tc);
    CHECK(a.log.back().train_loss < a.log.front().train_loss);
    std::vector<nlu::RoutingRecord> pool;
    for (const auto& e : data.valid) pool.push_back({e.utterance, e.nbest, e.routed_domain});
    const auto scores = score_pool(a.bundle, pool);
    const Head head = kind == ModelKind::bilstm ? Head::domain : Head::fr;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      CHECK((score_of(scores[i], head) >= 0.5) == static_cast<bool>(data.valid[i].label_fr));
    }
    const auto b = train(data, cfg, vocab, nullptr, tc);
    CHECK(a.bundle.params == b.bundle.params);
    tc.seed = 12;
    CHECK_FALSE(train(data, cfg, vocab, nullptr, tc).bundle.params == a.bundle.params);
    tc.seed = 11;
  }
}

TEST_CASE("empty training split") {
  corpus::DatasetSplit empty;
  const auto vocab = toy_vocab();
  CHECK_THROWS_AS(train(empty, fixtures::tiny_model(ModelKind::transformer, vocab.size()), vocab, nullptr, {}),
                  EmptyDatasetError);
}

TEST_CASE("candidate filter") {
  const std::vector<ScoredRecord> scores{rec("a", 1, 0.9, 0.2), rec("b", 0, 0.99, 0.99), rec("c", 2, 0.5, 0.7),
                                         rec("d", 3, 0.7, 0.7), rec("e", 1, 0.49999, 0.1)};
  const auto dom = filter_candidates(scores, 0, 0.5, Head::domain);
  REQUIRE(dom.size() == 3);
  CHECK(dom[0].id == "a");
  CHECK(dom[1].id == "d");
  CHECK(dom[2].id == "c");
  const auto fr = filter_candidates(scores, 0, 0.5, Head::fr);
  REQUIRE(fr.size() == 2);
  CHECK(fr[0].id == "c");  // tie on 0.7 broken by id
  CHECK(fr[1].id == "d");
  CHECK(filter_candidates(scores, 0, 0.5, Head::domain, 1).size() == 1);

  // Raising the threshold never adds candidates.
  std::size_t last = scores.size();
  for (double t : {0.0, 0.3, 0.5, 0.7, 0.9, 1.0}) {
    const auto n = filter_candidates(scores, 0, t, Head::domain).size();
    CHECK(n <= last);
    last = n;
  }
  CHECK(filter_candidates(scores, 0, 0.0, Head::domain).size() == 4);
  CHECK_THROWS_AS(filter_candidates(scores, 0, 1.5, Head::domain), ContractError);
  CHECK_THROWS_AS(filter_candidates({rec("x", 1, 0.5, std::nullopt)}, 0, 0.5, Head::fr), ContractError);
}

TEST_CASE("ensemble averages members") {
  const std::vector<ScoredRecord> m1{rec("a", 1, 0.2, 0.4), rec("b", 2, 0.6, 0.0)};
  const std::vector<ScoredRecord> m2{rec("b", 2, 0.8, 1.0), rec("a", 1, 0.4, 0.2)};
  const auto e = ensemble_scores({m1, m2});
  REQUIRE(e.size() == 2);
  CHECK(e[0].id == "a");
  CHECK(e[0].p_domain == doctest::Approx(0.3));
  CHECK(*e[0].p_fr == doctest::Approx(0.3));
  CHECK(e[1].p_domain == doctest::Approx(0.7));
  CHECK(*e[1].p_fr == doctest::Approx(0.5));
  const std::vector<ScoredRecord> single{rec("a", 1, 0.0, std::nullopt), rec("b", 2, 0.0, std::nullopt)};
  CHECK_FALSE(ensemble_scores({m1, single})[0].p_fr.has_value());
  try {
    ensemble_scores({m1, {rec("a", 1, 0.1, 0.1), rec("z", 1, 0.1, 0.1)}});
    FAIL("expected ContractError");
  } catch (const ContractError& err) {
    const std::string what = err.what();
    CHECK(what.find("b") != std::string::npos);
    CHECK(what.find("z") != std::string::npos);
  }
  CHECK_THROWS_AS(ensemble_scores({}), ContractError);
}

TEST_CASE("score files round trip") {
  fixtures::TempDir dir("scores");
  const std::vector<ScoredRecord> records{rec("a", 1, 0.123456789, 0.5), rec("b", 2, 0.25, std::nullopt)};
  ScoreFileHeader h{"abc", "fr", 0.5, 0};
  write_scores(dir / "s.jsonl", h, records);
  const auto [head, back] = read_scores(dir / "s.jsonl");
  CHECK(back == records);
  CHECK(head.model_digest == "abc");
  CHECK(head.threshold == 0.5);
  write_text_file(dir / "empty.jsonl", "");
  CHECK_THROWS_AS(read_scores(dir / "empty.jsonl"), ParseError);
  write_text_file(dir / "nohead.jsonl", scored_record_to_json(records[0]).dump() + "\n");
  CHECK_THROWS_AS(read_scores(dir / "nohead.jsonl"), ParseError);
}

TEST_CASE("scoring rejects unknown hypothesis domains") {
  const auto vocab = toy_vocab();
  models::ModelBundle b;
  b.config = fixtures::tiny_model(ModelKind::transformer_nbest_single, vocab.size());
  b.vocab = vocab;
  b.params = models::init_params(b.config, 1);
  nlu::RoutingRecord r;
  r.utterance = {"u", {"play"}, 1, 0};
  r.nbest = fixtures::nbest({{7, 1.0}});
  r.routed_domain = 7;
  CHECK_THROWS_AS(score_pool(b, {r}), ContractError);
}

TEST_CASE("train config strictness") {
  CHECK_THROWS_AS(train_config_from_json(Json{{"epoch", 3}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json{{"epochs", 0}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(Json{{"epochs", "three"}}), ConfigError);
  CHECK(train_config_from_json(to_json(TrainConfig{})).base_lr == 2e-5);
}
