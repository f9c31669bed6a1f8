#include "frforge/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "frforge/common/error.hpp"

namespace frforge::eval {

Confusion confusion_counts(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) {
    throw ContractError("confusion_counts: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool y = labels[i] != 0;
    if (p && y) ++c.tp;
    else if (p) ++c.fp;
    else if (y) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Prf prf(double precision, double recall) {
  const double denom = precision + recall;
  return {precision, recall, denom > 0 ? 2 * precision * recall / denom : 0.0};
}

Prf prf(const Confusion& c) {
  const auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
  return prf(ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn));
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("pr_curve: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; }));
  if (positives == 0) throw ContractError("pr_curve: no positive labels");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isfinite(scores[i])) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<PrPoint> raw;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] != 0 ? tp : fp) += 1;
    const auto m = prf(static_cast<double>(tp) / static_cast<double>(tp + fp),
                       static_cast<double>(tp) / static_cast<double>(positives));
    raw.push_back({t, m.precision, m.recall, m.f1, tp, fp});
  }
  std::vector<PrPoint> out;
  for (const auto& p : raw) {
    if (!out.empty() && out.back().recall == p.recall) {
      if (p.precision > out.back().precision) out.back() = p;
      continue;
    }
    out.push_back(p);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty set");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_comparison(const DetectionReport& r) {
  std::size_t width = 5;
  for (const auto& row : r.rows) width = std::max(width, row.name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = "threshold " + fixed(r.threshold, 2) + ", " + std::to_string(r.examples) + " examples, " +
                    std::to_string(r.positives) + " false rejects\n\n";
  out += pad("model", width) + "  precision  recall     f1     per-seed f1\n";
  for (const auto& row : r.rows) {
    out += pad(row.name, width) + "  " + pad(fixed(100 * row.metrics.precision, 1), 9) + "  " +
           pad(fixed(100 * row.metrics.recall, 1), 9) + "  " + pad(fixed(100 * row.metrics.f1, 1), 5) + "  ";
    for (std::size_t i = 0; i < row.seed_f1.size(); ++i) out += (i ? " " : "") + fixed(100 * row.seed_f1[i], 1);
    out += "\n";
  }
  return out;
}

void render_report(const DetectionReport& r, const std::filesystem::path& dir) {
  OrderedJson j;
  j["threshold"] = r.threshold;
  j["target_domain"] = r.target_domain;
  j["examples"] = r.examples;
  j["positives"] = r.positives;
  j["rows"] = OrderedJson::array();
  for (const auto& row : r.rows) {
    OrderedJson o;
    o["name"] = row.name;
    o["tp"] = row.counts.tp;
    o["fp"] = row.counts.fp;
    o["fn"] = row.counts.fn;
    o["tn"] = row.counts.tn;
    o["precision"] = quantize_sig9(row.metrics.precision);
    o["recall"] = quantize_sig9(row.metrics.recall);
    o["f1"] = quantize_sig9(row.metrics.f1);
    o["seed_f1"] = OrderedJson::array();
    for (double f : row.seed_f1) o["seed_f1"].push_back(quantize_sig9(f));
    j["rows"].push_back(o);
  }
  j["extra"] = OrderedJson::parse(r.extra.dump());
  write_text_file(dir / "report.json", j.dump(2) + "\n");
  write_text_file(dir / "comparison.txt", render_comparison(r));
  std::string csv = "model,threshold,precision,recall,f1\n";
  for (const auto& [name, curve] : r.curves) {
    for (const auto& p : curve) {
      csv += name + "," + fixed(p.threshold, 6) + "," + fixed(p.precision, 6) + "," + fixed(p.recall, 6) + "," +
             fixed(p.f1, 6) + "\n";
    }
  }
  write_text_file(dir / "pr_curve.csv", csv);
}

}  // namespace frforge::eval
