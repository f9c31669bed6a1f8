#include "frforge/corpus/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::corpus {
namespace {

std::vector<LabeledExample> sample(std::vector<const nlu::RoutingRecord*> pool, std::size_t k,
                                   DomainId target, Rng& rng) {
  rng.shuffle(pool.begin(), pool.end());
  std::vector<LabeledExample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(label(*pool[i], target));
  return out;
}

// Largest-remainder apportionment of `total` slots proportional to `sizes`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, std::size_t total) {
  const double sum = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = sum > 0 ? static_cast<double>(total) * static_cast<double>(sizes[i]) / sum : 0.0;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r) {
    const auto i = remainders[r].second;
    if (out[i] < sizes[i]) ++out[i], ++assigned;
  }
  return out;
}

bool by_id(const LabeledExample& a, const LabeledExample& b) { return a.utterance.id < b.utterance.id; }

}  // namespace

LabeledExample label(const nlu::RoutingRecord& record, DomainId target) {
  LabeledExample e;
  e.utterance = record.utterance;
  e.nbest = record.nbest;
  e.routed_domain = record.routed_domain;
  e.label_domain = record.utterance.true_domain == target ? 1 : 0;
  e.label_fr = e.label_domain && record.routed_domain != target ? 1 : 0;
  return e;
}

DatasetSplit build_fr_dataset(const std::vector<nlu::RoutingRecord>& logs, DomainId target,
                              const DatasetConfig& config) {
  if (config.ratio < 1) throw ConfigError("ratio must be at least 1");
  if (!(config.holdout >= 0.0 && config.holdout < 1.0)) throw ConfigError("holdout must be in [0,1)");
  if (!(config.accepted_mix >= 0.0 && config.accepted_mix <= 1.0)) {
    throw ConfigError("accepted_mix must be in [0,1]");
  }
  std::vector<const nlu::RoutingRecord*> fr, accepted, rejected;
  for (const auto& r : logs) {
    const bool in_domain = r.utterance.true_domain == target;
    const bool routed_here = r.routed_domain == target;
    if (in_domain && !routed_here) fr.push_back(&r);
    else if (in_domain) accepted.push_back(&r);
    else if (!routed_here) rejected.push_back(&r);
  }
  if (fr.empty()) throw EmptyDatasetError("logs contain no false rejects for the target domain");

  Rng rng(derive_seed(config.seed, "dataset"));
  const std::size_t n_pos = config.fr_cap > 0 ? std::min(config.fr_cap, fr.size()) : fr.size();
  const std::size_t n_non = static_cast<std::size_t>(config.ratio) * n_pos;
  const auto n_acc = static_cast<std::size_t>(std::llround(config.accepted_mix * static_cast<double>(n_non)));
  const std::size_t n_rej = n_non - n_acc;
  if (n_acc > accepted.size() || n_rej > rejected.size()) {
    double achievable = static_cast<double>(config.ratio);
    if (config.accepted_mix > 0) {
      achievable = std::min(achievable, static_cast<double>(accepted.size()) /
                                            (config.accepted_mix * static_cast<double>(n_pos)));
    }
    if (config.accepted_mix < 1) {
      achievable = std::min(achievable, static_cast<double>(rejected.size()) /
                                            ((1.0 - config.accepted_mix) * static_cast<double>(n_pos)));
    }
    throw RatioInfeasibleError("not enough non-false-reject records for ratio 1:" +
                                   std::to_string(config.ratio) + " (achievable 1:" +
                                   std::to_string(achievable) + ")",
                               achievable);
  }

  std::array<std::vector<LabeledExample>, 3> strata{sample(fr, n_pos, target, rng),
                                                    sample(accepted, n_acc, target, rng),
                                                    sample(rejected, n_rej, target, rng)};
  std::vector<std::size_t> sizes;
  for (const auto& s : strata) sizes.push_back(s.size());
  const std::size_t total = n_pos + n_non;
  const auto n_valid = static_cast<std::size_t>(std::llround(config.holdout * static_cast<double>(total)));
  const auto valid_counts = apportion(sizes, n_valid);

  DatasetSplit split;
  split.ratio_fr_to_nonfr = {1, config.ratio};
  split.holdout_fraction = config.holdout;
  split.target_domain = target;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto& stratum = strata[s];
    // Samples are already in random order; the first valid_counts[s] are held out.
    for (std::size_t i = 0; i < stratum.size(); ++i) {
      (i < valid_counts[s] ? split.valid : split.train).push_back(std::move(stratum[i]));
    }
  }
  std::sort(split.train.begin(), split.train.end(), by_id);
  std::sort(split.valid.begin(), split.valid.end(), by_id);
  return split;
}

Json labeled_example_to_json(const LabeledExample& e) {
  Json j = Json::object();
  j["utterance"] = utterance_to_json(e.utterance);
  j["nbest"] = nlu::nbest_to_json(e.nbest);
  j["routed_domain"] = e.routed_domain;
  j["label_domain"] = e.label_domain;
  j["label_fr"] = e.label_fr;
  return j;
}

LabeledExample labeled_example_from_json(const Json& j, const std::string& path, std::size_t line) {
  require_known_fields(j, {"utterance", "nbest", "routed_domain", "label_domain", "label_fr"}, path, line);
  for (auto key : {"utterance", "nbest", "routed_domain", "label_domain", "label_fr"}) {
    if (!j.contains(key)) throw ParseError(path, line, std::string("missing field '") + key + "'");
  }
  LabeledExample e;
  e.utterance = utterance_from_json(j.at("utterance"), path, line);
  e.nbest = nlu::nbest_from_json(j.at("nbest"), path, line);
  e.routed_domain = j.at("routed_domain").get<int>();
  e.label_domain = j.at("label_domain").get<int>();
  e.label_fr = j.at("label_fr").get<int>();
  if ((e.label_domain != 0 && e.label_domain != 1) || (e.label_fr != 0 && e.label_fr != 1)) {
    throw ParseError(path, line, "labels must be 0 or 1");
  }
  if (e.label_fr > e.label_domain) throw ParseError(path, line, "label_fr=1 requires label_domain=1");
  if (e.label_domain && e.label_fr != (e.routed_domain != e.utterance.true_domain ? 1 : 0)) {
    throw ParseError(path, line, "label_fr inconsistent with routing");
  }
  if (e.nbest.empty() || e.nbest.hypotheses[0].domain_id != e.routed_domain) {
    throw ParseError(path, line, "routed_domain differs from the top hypothesis");
  }
  return e;
}

void write_examples(const std::filesystem::path& path, const std::vector<LabeledExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += labeled_example_to_json(e).dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

std::vector<LabeledExample> read_examples(const std::filesystem::path& path) {
  std::vector<LabeledExample> out;
  read_jsonl(path, [&](const Json& j, std::size_t line) {
    out.push_back(labeled_example_from_json(j, path.string(), line));
  });
  return out;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
  write_examples(dir / "dataset.train.jsonl", split.train);
  write_examples(dir / "dataset.valid.jsonl", split.valid);
  Json meta;
  meta["schema_version"] = 1;
  meta["ratio_fr_to_nonfr"] = {split.ratio_fr_to_nonfr.first, split.ratio_fr_to_nonfr.second};
  meta["holdout_fraction"] = split.holdout_fraction;
  meta["target_domain"] = split.target_domain;
  write_text_file(dir / "dataset.meta.json", meta.dump(2) + "\n");
}

DatasetSplit read_dataset(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.train = read_examples(dir / "dataset.train.jsonl");
  split.valid = read_examples(dir / "dataset.valid.jsonl");
  const auto meta_path = dir / "dataset.meta.json";
  if (std::filesystem::exists(meta_path)) {
    try {
      const auto meta = Json::parse(read_text_file(meta_path));
      const auto ratio = meta.at("ratio_fr_to_nonfr");
      split.ratio_fr_to_nonfr = {ratio.at(0).get<int>(), ratio.at(1).get<int>()};
      split.holdout_fraction = meta.at("holdout_fraction").get<double>();
      split.target_domain = meta.at("target_domain").get<int>();
    } catch (const Json::exception& e) {
      throw ParseError(meta_path.string(), 1, e.what());
    }
  }
  return split;
}

}  // namespace frforge::corpus
