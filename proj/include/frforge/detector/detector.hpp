#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "frforge/corpus/dataset.hpp"
#include "frforge/models/bundle.hpp"

namespace frforge::detector {

struct TrainConfig {
  int epochs = 3;
  int batch_size = 32;
  double base_lr = 2e-5;
  double warmup_fraction = 0.1;
  bool linear_decay = false;
  double w_domain = 1.0;
  double w_fr = 1.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);
Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct TrainResult {
  models::ModelBundle bundle;
  std::int64_t steps = 0;
  std::vector<EpochLog> log;
};

// epochs * ceil(n_train / batch_size).
std::int64_t planned_steps(std::size_t n_train, int epochs, int batch_size);

// Called after every optimizer step with (step, batch index within epoch, loss).
using StepObserver = std::function<void(std::int64_t, std::size_t, double)>;

// Fine-tunes a fresh model of `model.kind` on `data.train`. Transformer kinds
// start from `pretrained` encoder weights when given. Throws NumericError
// naming the step and batch if the loss or a gradient goes non-finite.
TrainResult train(const corpus::DatasetSplit& data, const models::ModelConfig& model,
                  const corpus::Vocabulary& vocab, const models::ParamStore* pretrained, const TrainConfig& config,
                  const StepObserver& observer = {});

// Mean per-example loss with inference-mode forward passes.
double evaluate_loss(const models::ModelBundle& bundle, const std::vector<corpus::LabeledExample>& examples,
                     const TrainConfig& config);

std::vector<models::ModelInput> make_inputs(const corpus::Vocabulary& vocab,
                                            const std::vector<corpus::LabeledExample>& examples);
std::vector<models::ModelInput> make_inputs(const corpus::Vocabulary& vocab,
                                            const std::vector<nlu::RoutingRecord>& records);

struct ScoredRecord {
  std::string id;
  corpus::DomainId routed_domain = 0;
  double p_domain = 0.0;
  std::optional<double> p_fr;

  bool operator==(const ScoredRecord&) const = default;
};

// Scores every record. Throws ContractError if a hypothesis names a domain
// the bundle was not built for.
std::vector<ScoredRecord> score_pool(const models::ModelBundle& bundle, const std::vector<nlu::RoutingRecord>& pool);

// Records routed away from the target whose head probability is >= threshold,
// ordered by probability (descending) then id. top_k = 0 keeps all.
std::vector<ScoredRecord> filter_candidates(const std::vector<ScoredRecord>& scores, corpus::DomainId target,
                                            double threshold, models::Head head, std::size_t top_k = 0);

// Per-record mean over members. Every member must cover the same ids;
// otherwise ContractError lists the symmetric difference.
std::vector<ScoredRecord> ensemble_scores(const std::vector<std::vector<ScoredRecord>>& members);

double score_of(const ScoredRecord& r, models::Head head);

struct ScoreFileHeader {
  std::string model_digest;
  std::string head;
  std::optional<double> threshold;
  corpus::DomainId target_domain = 0;
};

Json scored_record_to_json(const ScoredRecord& r);
ScoredRecord scored_record_from_json(const Json& j, const std::string& path, std::size_t line);
// First line is a header object, then one record per line.
void write_scores(const std::filesystem::path& path, const ScoreFileHeader& header,
                  const std::vector<ScoredRecord>& records);
std::pair<ScoreFileHeader, std::vector<ScoredRecord>> read_scores(const std::filesystem::path& path);

}  // namespace frforge::detector
