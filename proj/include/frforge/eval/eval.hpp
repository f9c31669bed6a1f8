#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frforge/common/io.hpp"

namespace frforge::eval {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  bool operator==(const Confusion&) const = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Predictions and labels are 0/1; lengths must match.
Confusion confusion_counts(std::span<const int> predicted, std::span<const int> labels);

// Harmonic mean; 0 when both inputs are 0. Works on any common scale.
Prf prf(double precision, double recall);
// 0/0 ratios are reported as 0.
Prf prf(const Confusion& c);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;

  bool operator==(const PrPoint&) const = default;
};

// One point per distinct finite score (predict positive iff score >= threshold),
// thresholds descending. Points with the same recall collapse to the one with
// the highest precision. Non-finite scores are never predicted positive.
// Throws ContractError when `labels` has no positives.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

struct MetricRow {
  std::string name;
  Confusion counts;
  Prf metrics;
  std::vector<double> seed_f1;  // empty for single-model rows
};

struct DetectionReport {
  double threshold = 0.5;
  int target_domain = 0;
  std::size_t examples = 0;
  std::size_t positives = 0;
  std::vector<MetricRow> rows;
  std::vector<std::pair<std::string, std::vector<PrPoint>>> curves;
  Json extra = Json::object();
};

// report.json, comparison.txt and pr_curve.csv; byte-identical for equal input.
void render_report(const DetectionReport& report, const std::filesystem::path& dir);
std::string render_comparison(const DetectionReport& report);

double median(std::vector<double> values);

}  // namespace frforge::eval
