#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <doctest.h>

#include "fixtures.hpp"
#include "frforge/common/error.hpp"
#include "frforge/common/io.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/eval/eval.hpp"

using namespace frforge;
using namespace frforge::eval;

namespace {

// Precision/recall at every distinct threshold by direct counting.
struct Brute {
  double threshold;
  std::size_t tp;
  std::size_t fp;
};

std::vector<Brute> brute_force(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::set<double, std::greater<>> thresholds;
  for (double s : scores) {
    if (std::isfinite(s)) thresholds.insert(s);
  }
  std::vector<Brute> out;
  for (double t : thresholds) {
    Brute b{t, 0, 0};
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (std::isfinite(scores[i]) && scores[i] >= t) (labels[i] ? b.tp : b.fp) += 1;
    }
    out.push_back(b);
  }
  return out;
}

}  // namespace

TEST_CASE("f1 from precision and recall") {
  CHECK(prf(20.3, 9.7).f1 == doctest::Approx(13.1).epsilon(0.05 / 13.1));
  CHECK(prf(23.4, 35.3).f1 == doctest::Approx(28.1).epsilon(0.05 / 28.1));
  CHECK(prf(37.4, 28.3).f1 == doctest::Approx(32.2).epsilon(0.05 / 32.2));
  CHECK(prf(0.0, 0.0).f1 == 0.0);
  CHECK(prf(1.0, 1.0).f1 == 1.0);
}

TEST_CASE("confusion counts") {
  const std::vector<int> pred{1, 1, 0, 0, 1, 0};
  const std::vector<int> y{1, 0, 1, 0, 1, 0};
  const auto c = confusion_counts(pred, y);
  CHECK(c == Confusion{2, 1, 1, 2});
  const auto m = prf(c);
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(prf(Confusion{0, 0, 3, 5}).f1 == 0.0);
  CHECK_THROWS_AS(confusion_counts(std::vector<int>{1}, y), ContractError);
}

TEST_CASE("pr curve matches brute force on 50 random records") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
      // Coarse scores force ties.
      scores.push_back(std::round(rng.uniform() * 20) / 20);
      labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
    }
    labels[0] = 1;
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const auto curve = pr_curve(scores, labels);
    const auto brute = brute_force(scores, labels);

    // Every curve point is a brute-force threshold with identical counts.
    for (const auto& p : curve) {
      const auto it = std::find_if(brute.begin(), brute.end(), [&](const Brute& b) { return b.threshold == p.threshold; });
      REQUIRE(it != brute.end());
      CHECK(p.tp == it->tp);
      CHECK(p.fp == it->fp);
      CHECK(p.precision == doctest::Approx(static_cast<double>(it->tp) / static_cast<double>(it->tp + it->fp)));
      CHECK(p.recall == doctest::Approx(static_cast<double>(it->tp) / static_cast<double>(positives)));
    }
    // Every brute-force recall level appears, at its best precision.
    for (const auto& b : brute) {
      const double recall = static_cast<double>(b.tp) / static_cast<double>(positives);
      const double precision = static_cast<double>(b.tp) / static_cast<double>(b.tp + b.fp);
      const auto it = std::find_if(curve.begin(), curve.end(), [&](const PrPoint& p) { return p.recall == recall; });
      REQUIRE(it != curve.end());
      CHECK(it->precision >= precision);
    }
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].recall > curve[i - 1].recall);
      CHECK(curve[i].threshold < curve[i - 1].threshold);
    }
    CHECK(curve.back().recall == 1.0);
  }
}

TEST_CASE("pr curve edge cases") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto curve = pr_curve(std::vector<double>{0.9, nan, 0.1}, std::vector<int>{1, 1, 0});
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].recall == 0.5);
  CHECK_THROWS_AS(pr_curve(std::vector<double>{0.5}, std::vector<int>{0}), ContractError);
  CHECK_THROWS_AS(pr_curve(std::vector<double>{0.5}, std::vector<int>{1, 0}), ContractError);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), ContractError);
}

TEST_CASE("report rendering is deterministic") {
  DetectionReport r;
  r.examples = 10;
  r.positives = 2;
  r.rows.push_back({"transformer", Confusion{1, 2, 1, 6}, prf(Confusion{1, 2, 1, 6}), {10.0, 20.0, 30.0}});
  r.rows.push_back({"ensemble", Confusion{2, 0, 0, 8}, prf(Confusion{2, 0, 0, 8}), {}});
  r.curves.push_back({"transformer", pr_curve(std::vector<double>{0.9, 0.2, 0.7}, std::vector<int>{1, 0, 1})});
  fixtures::TempDir a("report-a");
  fixtures::TempDir b("report-b");
  render_report(r, a.path());
  render_report(r, b.path());
  for (const char* name : {"report.json", "comparison.txt", "pr_curve.csv"}) {
    CHECK(read_text_file(a / name) == read_text_file(b / name));
  }
  const auto text = render_comparison(r);
  CHECK(text.find("transformer") != std::string::npos);
  CHECK(text.find("ensemble") != std::string::npos);
  const auto csv = read_text_file(a / "pr_curve.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
