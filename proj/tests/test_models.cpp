#include <cmath>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/models/bundle.hpp"
#include "frforge/numeric/gradcheck.hpp"

using namespace frforge;
using namespace frforge::models;
using fixtures::nbest;

namespace {

constexpr int kVocab = 12;

std::vector<ModelInput> sample_inputs() {
  return {{{4, 5, 6}, nbest({{1, 0.6}, {0, 0.3}, {2, 0.1}})},
          {{7}, nbest({{0, 0.9}})},
          {{8, 9, 10, 11, 4}, nbest({{3, 0.5}, {2, 0.3}, {1, 0.15}, {0, 0.05}})}};
}

Mat<double> run_encoder(const ModelConfig& cfg, const ParamStore& p, std::vector<std::vector<int>> tokens,
                        ForwardProbe* probe = nullptr) {
  Tape<double> t(&p);
  return t.value(encode(t, cfg, std::span<const std::vector<int>>(tokens), probe));
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("fusion input width is H + 6N") {
  ModelConfig big;
  big.transformer.hidden = 1024;
  big.fusion.n = 5;
  CHECK(big.fusion.nbest_dim() == 30);
  CHECK(big.fusion.fused_input_dim(1024) == 1054);
  CHECK(big.trunk_input_dim() == 1054);
  ModelConfig desk;
  CHECK(desk.transformer.hidden == 64);
  CHECK(desk.fusion.n == 5);
  CHECK(desk.fusion.d == 6);
  CHECK(desk.trunk_input_dim() == 94);
  desk.kind = ModelKind::transformer;
  CHECK(desk.trunk_input_dim() == 64);
}

TEST_CASE("bi-lstm encoder") {
  auto cfg = fixtures::tiny_model(ModelKind::bilstm, kVocab);
  const auto p = init_params(cfg, 3);
  const auto h = run_encoder(cfg, p, {{4, 5, 6, 7}, {7, 6, 5, 4}, {9}});
  CHECK(h.rows() == 3);
  CHECK(h.cols() == 2 * cfg.lstm.hidden);
  CHECK(cfg.encoder_dim() == 2 * cfg.lstm.hidden);
  CHECK((h.row(0) - h.row(1)).norm() > 1e-6);
  CHECK(h.row(2).allFinite());
  CHECK(p.at("lstm.forward.bias").values[static_cast<std::size_t>(cfg.lstm.hidden)] == 1.0f);
}

TEST_CASE("transformer encoder") {
  auto cfg = fixtures::tiny_model(ModelKind::transformer, kVocab);
  const auto p = init_params(cfg, 4);
  ForwardProbe probe;
  const auto h = run_encoder(cfg, p, {{4, 5, 6}, {5, 4, 6}, {9}}, &probe);
  CHECK(h.cols() == cfg.transformer.hidden);
  CHECK((h.row(0) - h.row(1)).norm() > 1e-6);
  REQUIRE(probe.attention.size() == static_cast<std::size_t>(cfg.transformer.layers));
  for (const auto& layer : probe.attention) {
    CHECK(layer.size() == 3u * static_cast<std::size_t>(cfg.transformer.heads));
    for (const auto& a : layer) {
      for (Eigen::Index r = 0; r < a.rows(); ++r) CHECK(std::abs(a.row(r).sum() - 1.0) <= 1e-5);
    }
  }
  SUBCASE("desk width") {
    auto desk = ModelConfig{};
    desk.kind = ModelKind::transformer;
    desk.transformer.vocab_size = kVocab;
    const auto dp = init_params(desk, 1);
    CHECK(run_encoder(desk, dp, {{4, 5}}).cols() == 64);
  }
  SUBCASE("long inputs are truncated to max_length") {
    ForwardProbe trunc;
    std::vector<int> long_seq(20, 5);
    run_encoder(cfg, p, {long_seq}, &trunc);
    CHECK(trunc.truncated == 1);
    CHECK(transformer_ids(long_seq, cfg.transformer.max_length, nullptr).size() ==
          static_cast<std::size_t>(cfg.transformer.max_length));
  }
}

TEST_CASE("n-best embedding") {
  auto cfg = fixtures::tiny_model(ModelKind::transformer_nbest_single, kVocab);
  cfg.fusion.n = 5;
  const auto p = init_params(cfg, 5);
  auto embed = [&](std::vector<nlu::NBestList> lists, const FusionConfig& f) {
    Tape<double> t(&p);
    return Mat<double>(t.value(embed_nbest(t, f, std::span<const nlu::NBestList>(lists))));
  };
  SUBCASE("width and padding") {
    const auto v = embed({nbest({{2, 0.5}, {1, 0.3}, {0, 0.2}})}, cfg.fusion);
    CHECK(v.cols() == 30);
    const auto table = p.at("nbest.domain_embedding").as<double>();
    const auto null_row = table.row(cfg.fusion.null_hypothesis_id());
    for (int slot : {3, 4}) CHECK(v.block(0, slot * 6, 1, 6) == null_row);
  }
  SUBCASE("rank order is positional") {
    const auto a = embed({nbest({{1, 0.4}, {2, 0.4}})}, cfg.fusion);
    const auto b = embed({nbest({{2, 0.4}, {1, 0.4}})}, cfg.fusion);
    CHECK((a - b).norm() > 1e-6);
  }
  SUBCASE("table and score terms") {
    const auto table = p.at("nbest.domain_embedding").as<double>();
    const auto proj = p.at("nbest.score_projection").as<double>();
    const auto v = embed({nbest({{3, 0.25}})}, cfg.fusion);
    CHECK((v.block(0, 0, 1, 6) - (table.row(3) + 0.25 * proj)).norm() <= 1e-12);
    auto only_table = cfg.fusion;
    only_table.mode = HypothesisEmbedding::table_only;
    CHECK(embed({nbest({{3, 0.25}})}, only_table).block(0, 0, 1, 6) == table.row(3));
    auto only_score = cfg.fusion;
    only_score.mode = HypothesisEmbedding::score_only;
    const auto s = embed({nbest({{3, 0.25}})}, only_score);
    CHECK((s.block(0, 0, 1, 6) - 0.25 * proj).norm() <= 1e-12);
    CHECK(s.block(0, 6, 1, 6) == table.row(cfg.fusion.null_hypothesis_id()));
  }
  SUBCASE("unknown domain id") {
    CHECK_THROWS_AS(embed({nbest({{4, 1.0}})}, cfg.fusion), ContractError);
  }
}

TEST_CASE("fusion with a zero n-best vector equals the feed-forward of [cls | 0]") {
  auto cfg = fixtures::tiny_model(ModelKind::transformer_nbest_single, kVocab);
  const auto p = init_params(cfg, 6);
  const std::vector<std::vector<int>> tokens{{4, 5, 6}, {7, 8}};
  Tape<double> t(&p);
  const Var cls = encode_transformer(t, cfg.transformer, std::span<const std::vector<int>>(tokens));
  const Var zero = t.constant(Mat<double>::Zero(2, cfg.fusion.nbest_dim()));
  Var h = fuse(t, cfg, cls, zero);
  h = numeric::ops::gelu(t, detail::linear_named(t, h, "trunk.layer0"));
  const auto logits = t.value(detail::linear_named(t, h, "head.domain"));

  const Mat<double> c = t.value(cls);
  const auto w1 = p.at("trunk.layer0.weight").as<double>();
  const auto b1 = p.at("trunk.layer0.bias").as<double>();
  const auto w2 = p.at("head.domain.weight").as<double>();
  const auto b2 = p.at("head.domain.bias").as<double>();
  for (Eigen::Index r = 0; r < 2; ++r) {
    double out = b2(0, 0);
    for (Eigen::Index j = 0; j < w1.cols(); ++j) {
      double z = b1(0, j);
      for (Eigen::Index i = 0; i < c.cols(); ++i) z += c(r, i) * w1(i, j);
      out += gelu(z) * w2(j, 0);
    }
    CHECK(logits(r, 0) == doctest::Approx(out).epsilon(1e-12));
  }
  CHECK_THROWS_AS(fuse(t, cfg, cls, t.constant(Mat<double>::Zero(2, 5))), ContractError);
}

TEST_CASE("heads") {
  auto cfg = fixtures::tiny_model(ModelKind::transformer_nbest_multitask, kVocab);
  auto p = init_params(cfg, 7);
  const auto inputs = sample_inputs();
  const auto base = predict(cfg, p, inputs);
  for (const auto& h : base) {
    REQUIRE(h.p_fr.has_value());
    CHECK(h.p_domain >= 0.0);
    CHECK(h.p_domain <= 1.0);
    CHECK(*h.p_fr >= 0.0);
    CHECK(*h.p_fr <= 1.0);
  }
  for (auto& v : p.at("head.fr.weight").values) v += 0.5f;
  const auto perturbed = predict(cfg, p, inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    CHECK(perturbed[i].p_domain == base[i].p_domain);
    CHECK(perturbed[i].p_fr != base[i].p_fr);
  }
  for (auto& v : p.at("head.domain.weight").values) v = 0.0f;
  for (auto& v : p.at("head.domain.bias").values) v = 0.0f;
  for (const auto& h : predict(cfg, p, inputs)) CHECK(h.p_domain == 0.5);

  auto single = fixtures::tiny_model(ModelKind::transformer_nbest_single, kVocab);
  const auto sp = init_params(single, 7);
  CHECK_FALSE(sp.contains("head.fr.weight"));
  const auto probs = predict(single, sp, inputs);
  CHECK_FALSE(probs[0].p_fr.has_value());
  CHECK_THROWS_AS(head_probability(probs[0], Head::fr), ContractError);
}

TEST_CASE("batched prediction matches per-example forward passes") {
  for (auto kind : {ModelKind::bilstm, ModelKind::transformer, ModelKind::transformer_nbest_multitask}) {
    auto cfg = fixtures::tiny_model(kind, kVocab);
    const auto p = init_params(cfg, 8);
    auto inputs = sample_inputs();
    inputs.push_back(inputs[0]);
    inputs.back().nbest = nbest({{2, 0.7}, {0, 0.3}});
    const auto batched = predict(cfg, p, inputs, 2);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tape<float> t(&p);
      const auto logits = forward(t, cfg, std::span<const ModelInput>(&inputs[i], 1));
      const double single = numeric::binary_class_probs<double>(t.value(logits.domain)(0, 0)).second;
      CHECK(batched[i].p_domain == doctest::Approx(single).epsilon(1e-5));
    }
  }
}

TEST_CASE("end-to-end gradients match central differences for every kind") {
  const std::vector<double> domain_labels{1, 0, 1};
  const std::vector<double> fr_labels{1, 0, 0};
  for (auto kind : {ModelKind::bilstm, ModelKind::transformer, ModelKind::transformer_nbest_single,
                    ModelKind::transformer_nbest_multitask}) {
    CAPTURE(to_string(kind));
    const auto cfg = fixtures::tiny_model(kind, kVocab);
    const auto p = init_params(cfg, 21);
    const auto inputs = sample_inputs();
    const numeric::Computation<double> loss = [&](Tape<double>& t) {
      const auto logits = forward(t, cfg, std::span<const ModelInput>(inputs));
      return multitask_loss(t, logits, std::span<const double>(domain_labels), std::span<const double>(fr_labels),
                            1.0, 1.0);
    };
    const auto report = numeric::gradient_check(loss, p);
    INFO(report.worst_tensor, "[", report.worst_index, "] analytic ", report.worst_analytic, " numeric ",
         report.worst_numeric);
    CHECK(report.max_relative_error <= 1e-4);
    CHECK(report.elements_checked == p.parameter_count());
  }
}

TEST_CASE("bundle round trip") {
  fixtures::TempDir dir("bundle");
  auto cfg = fixtures::tiny_model(ModelKind::transformer_nbest_multitask, kVocab);
  std::vector<std::vector<std::string>> texts{{"a", "b", "c", "d", "e", "f", "g", "h"}};
  ModelBundle b{cfg, init_params(cfg, 2), corpus::Vocabulary::build(texts), {{"seed", 2}}};
  b.config.transformer.vocab_size = b.vocab.size();
  b.config.lstm.vocab_size = b.vocab.size();
  b.params = init_params(b.config, 2);
  save_bundle(dir / "m", b, 5);
  const auto back = load_bundle(dir / "m");
  CHECK(back.params == b.params);
  CHECK(back.vocab == b.vocab);
  CHECK(back.config.kind == b.config.kind);
  CHECK(back.provenance.at("seed") == 2);

  b.params.set("head.fr.weight", numeric::Tensor{{3, 1}, {0, 0, 0}});
  save_bundle(dir / "bad", b, 5);
  CHECK_THROWS(load_bundle(dir / "bad"));
}

TEST_CASE("masked-token pretraining keeps encoder tensors only") {
  TransformerConfig cfg;
  cfg.vocab_size = kVocab;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.ff_multiple = 2;
  cfg.max_length = 6;
  cfg.dropout = 0.0;
  std::vector<std::vector<int>> seqs;
  for (int i = 0; i < 64; ++i) seqs.push_back({4 + i % 4, 8 + i % 4, 5});
  PretrainConfig pc;
  pc.epochs = 3;
  pc.batch_size = 16;
  pc.base_lr = 1e-2;
  pc.seed = 3;
  pc.max_sequences = 40;
  const auto r = pretrain_encoder(cfg, seqs, pc);
  CHECK(r.steps == 3 * 3);
  CHECK(r.epoch_loss.size() == 3);
  for (const auto& [name, _] : r.encoder) CHECK(name.rfind("encoder.", 0) == 0);
  CHECK(r.encoder.contains("encoder.token_embedding"));
  const auto again = pretrain_encoder(cfg, seqs, pc);
  CHECK(again.encoder == r.encoder);
}
