#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "frforge/nlu/types.hpp"

namespace frforge::corpus {

struct LabeledExample {
  Utterance utterance;
  nlu::NBestList nbest;
  DomainId routed_domain = 0;
  int label_domain = 0;  // 1 iff true_domain == target
  int label_fr = 0;      // 1 iff true_domain == target and routed_domain != target

  bool operator==(const LabeledExample&) const = default;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
  std::pair<int, int> ratio_fr_to_nonfr{1, 15};
  double holdout_fraction = 0.15;
  DomainId target_domain = 0;

  std::size_t size() const { return train.size() + valid.size(); }
  bool operator==(const DatasetSplit&) const = default;
};

struct DatasetConfig {
  int ratio = 15;
  double holdout = 0.15;
  double accepted_mix = 0.1;
  std::size_t fr_cap = 0;  // 0 = keep every false reject
  std::uint64_t seed = 0;
};

LabeledExample label(const nlu::RoutingRecord& record, DomainId target);

// Positives are the false rejects in `logs`; negatives are drawn `ratio`
// times as many, mixing correctly rejected records with records correctly
// accepted to the target. The holdout is stratified by (label_domain, label_fr).
DatasetSplit build_fr_dataset(const std::vector<nlu::RoutingRecord>& logs, DomainId target,
                              const DatasetConfig& config);

Json labeled_example_to_json(const LabeledExample& e);
LabeledExample labeled_example_from_json(const Json& j, const std::string& path, std::size_t line);

void write_examples(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);
// Strict schema; empty file yields no examples.
std::vector<LabeledExample> read_examples(const std::filesystem::path& path);

// Writes dataset.train.jsonl, dataset.valid.jsonl and dataset.meta.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

}  // namespace frforge::corpus
