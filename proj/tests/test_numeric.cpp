#include <cmath>
#include <numbers>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/numeric/checkpoint.hpp"
#include "frforge/numeric/gradcheck.hpp"
#include "frforge/numeric/losses.hpp"
#include "frforge/numeric/ops.hpp"
#include "frforge/numeric/optim.hpp"

using namespace frforge;
using namespace frforge::numeric;
namespace op = frforge::numeric::ops;

TEST_CASE("square loss has gradient 2w") {
  ParamStore p;
  p.add_constant("w", {1}, 3.0f);
  p.add_constant("unused", {2, 2}, 1.0f);
  const auto ev = evaluate_with_gradients<double>(
      [](Tape<double>& t) {
        const Var w = t.param("w");
        return op::sum(t, op::mul(t, w, w));
      },
      p);
  CHECK(ev.loss == doctest::Approx(9.0));
  CHECK(ev.gradients.at("w")(0, 0) == 6.0);
  CHECK(ev.gradients.at("unused").isZero(0.0));
}

TEST_CASE("binary class probabilities") {
  const auto [p0, p1] = binary_class_probs(0.0);
  CHECK(p0 == 0.5);
  CHECK(p1 == 0.5);
  CHECK(binary_class_probs(std::log(3.0)).second == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(binary_class_probs(std::log(3.0)).first == doctest::Approx(0.25).epsilon(1e-12));
  const auto sat = binary_class_probs(1000.0);
  CHECK(std::isfinite(sat.second));
  CHECK(sat.second == 1.0);
  CHECK(std::isfinite(binary_class_probs(-1000.0).second));
}

TEST_CASE("clamped binary cross-entropy") {
  CHECK(bce_loss(1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(bce_loss(0.5, 1.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(bce_loss(0.5, 0.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  CHECK(bce_loss(0.0, 1.0) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
  CHECK(bce_loss(0.0, 1.0) == doctest::Approx(16.118).epsilon(1e-4));
}

TEST_CASE("adam closed form") {
  AdamState hyper;
  SUBCASE("first step moves by lr / (1 + eps)") {
    double w = 0.5, g = 1.0, m = 0, v = 0;
    adam_update(&w, &g, &m, &v, 1, 1, hyper, 0.1);
    CHECK(std::abs(w - (0.5 - 0.1 / (1.0 + 1e-8))) <= 1e-10);
  }
  SUBCASE("two steps g=1 then g=-1 follow the hand-computed sequence") {
    double w = 0.5, m = 0, v = 0;
    double g = 1.0;
    adam_update(&w, &g, &m, &v, 1, 1, hyper, 0.1);
    CHECK(std::abs(w - 0.400000001) <= 1e-10);
    g = -1.0;
    adam_update(&w, &g, &m, &v, 1, 2, hyper, 0.1);
    CHECK(std::abs(m - (-0.01)) <= 1e-15);
    CHECK(std::abs(v - 0.001999) <= 1e-15);
    CHECK(std::abs(w - 0.40526315884210523) <= 1e-10);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParamStore p(3);
    p.add_normal("a", {3, 4}, 1.0);
    const auto before = p.at("a");
    AdamState state;
    adam_step(p, {{"a", Mat<float>::Zero(3, 4)}}, state, 0.1);
    CHECK(p.at("a") == before);
    CHECK(state.step == 1);
  }
  SUBCASE("shape mismatch is a contract error") {
    ParamStore p;
    p.add("a", {2, 2});
    AdamState state;
    CHECK_THROWS_AS(adam_step(p, {{"a", Mat<float>::Zero(2, 3)}}, state, 0.1), ContractError);
  }
}

TEST_CASE("warmup schedule") {
  ScheduleConfig s;
  s.total_steps = 1000;
  CHECK(s.base_lr == 2e-5);
  CHECK(lr_at_step(0, s) == 0.0);
  CHECK(lr_at_step(100, s) == 2e-5);
  CHECK(lr_at_step(50, s) == 1e-5);
  CHECK(lr_at_step(1000, s) == 2e-5);
  s.linear_decay = true;
  CHECK(lr_at_step(1000, s) == 0.0);
  CHECK(lr_at_step(550, s) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at_step(1001, s), ContractError);
  s.base_lr = 0;
  CHECK_THROWS_AS(lr_at_step(1, s), ConfigError);
}

TEST_CASE("op gradients match central differences") {
  ParamStore p(11);
  p.add_normal("x", {3, 4}, 1.0);
  p.add_normal("w", {4, 5}, 0.5);
  p.add_normal("b", {5}, 0.5);
  p.add_constant("gain", {5}, 1.0f);
  p.add_normal("bias", {5}, 0.1);
  p.add_normal("table", {6, 4}, 1.0);
  const std::vector<int> rows{2, 0, 5};
  const std::vector<double> labels{1, 0, 1};
  const std::vector<int> classes{4, 1, 0};
  const Computation<double> f = [&](Tape<double>& t) {
    Var h = op::linear(t, op::add(t, t.param("x"), op::gather_rows(t, t.param("table"), rows)), t.param("w"),
                       t.param("b"));
    h = op::layer_norm(t, op::gelu(t, h), t.param("gain"), t.param("bias"));
    h = op::tanh(t, h);
    const Var first = op::reshape(t, op::gather_rows(t, op::reshape(t, h, 15, 1), std::vector<int>{0, 6, 12}), 3, 1);
    return op::add(t, op::softmax_cross_entropy(t, h, classes), op::bce_with_logits(t, first, std::span(labels)));
  };
  const auto report = gradient_check(f, p);
  INFO(report.worst_tensor, " ", report.worst_analytic, " vs ", report.worst_numeric);
  CHECK(report.max_relative_error <= 1e-6);
  CHECK(report.elements_checked == 12 + 20 + 5 + 5 + 5 + 24);
}

TEST_CASE("attention and lstm gradients match central differences") {
  ParamStore p(5);
  p.add_normal("x", {5, 4}, 1.0);
  p.add_normal("wq", {4, 4}, 0.5);
  p.add_normal("wi", {4, 12}, 0.5);
  p.add_normal("wh", {3, 12}, 0.5);
  p.add_normal("bl", {12}, 0.1);
  const std::vector<Segment> segs{{0, 2}, {2, 3}};
  const Computation<double> f = [&](Tape<double>& t) {
    const Var x = t.param("x");
    const Var q = op::matmul(t, x, t.param("wq"));
    const Var a = op::self_attention(t, q, x, x, std::span<const Segment>(segs), 2);
    const Var s = op::lstm_final_state(t, a, std::span<const Segment>(segs), t.param("wi"), t.param("wh"), t.param("bl"), false);
    return op::sum(t, op::mul(t, s, s));
  };
  const auto report = gradient_check(f, p);
  INFO(report.worst_tensor);
  CHECK(report.max_relative_error <= 1e-6);
}

TEST_CASE("checkpoint round trip and digest") {
  fixtures::TempDir dir("ckpt");
  ParamStore p(9);
  p.add_normal("a.weight", {3, 2}, 1.0);
  p.add_uniform("b", {4}, 0.3);
  save_checkpoint(dir / "c", p, 17, {{"note", "x"}});
  const auto back = load_checkpoint(dir / "c");
  CHECK(back.params == p);
  CHECK(back.step == 17);
  CHECK(back.extra.at("note") == "x");
  CHECK(checkpoint_digest(dir / "c") == checkpoint_digest(dir / "c"));
  save_checkpoint(dir / "d", p, 17, {{"note", "x"}});
  CHECK(checkpoint_digest(dir / "c") == checkpoint_digest(dir / "d"));
  p.at("b").values[0] += 1.0f;
  save_checkpoint(dir / "e", p, 17, {{"note", "x"}});
  CHECK(checkpoint_digest(dir / "c") != checkpoint_digest(dir / "e"));
}

TEST_CASE("parameter store contracts") {
  ParamStore p;
  p.add("a", {2});
  CHECK_THROWS_AS(p.add("a", {2}), ContractError);
  CHECK_THROWS_AS(p.at("missing"), ContractError);
  CHECK(p.parameter_count() == 2);
}
