#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "frforge/corpus/dataset.hpp"
#include "frforge/detector/detector.hpp"
#include "frforge/models/bundle.hpp"
#include "frforge/nlu/nlu_sim.hpp"

namespace frforge::cli {

struct CorpusSection {
  std::string spec_path;  // empty = built-in spec
  std::size_t size = 10000;
  // Live traffic routed into the logs the dataset is mined from.
  std::size_t traffic_size = 300000;
  // Fresh traffic scored by the detector for review.
  std::size_t pool_size = 200000;
  // Fresh traffic on which the feedback loop measures false rejects.
  std::size_t heldout_size = 100000;
};

struct PipelineSection {
  std::string target = "podcasts";
  int n = 5;
  double noise_sigma = 0.05;
  double false_reject_rate = 0.2;
  nlu::ProductionTrainConfig production;
  corpus::DatasetConfig dataset;
};

struct ModelSection {
  models::ModelConfig base;  // kind and vocabulary sizes are filled per member
  models::PretrainConfig pretrain;
  bool pretrained = true;
  std::vector<models::ModelKind> kinds = {models::ModelKind::bilstm, models::ModelKind::transformer,
                                          models::ModelKind::transformer_nbest_single,
                                          models::ModelKind::transformer_nbest_multitask};
};

struct TrainSection {
  detector::TrainConfig config;
  // Learning rate for the bi-LSTM, which has no pretrained encoder. 0 = config.base_lr.
  double bilstm_base_lr = 0.0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
};

struct DetectSection {
  double threshold = 0.5;
  models::Head head = models::Head::fr;
  std::size_t top_k = 0;
};

struct EvalSection {
  double threshold = 0.5;
  // "pool": every pool record routed away from the target, at the traffic's
  // natural imbalance. "valid": the dataset's validation split.
  std::string split = "pool";
};

struct FeedbackSection {
  double oracle_error_rate = 0.0;
  std::size_t min_confirmed = 50;
  bool warm_start = true;
  int retrain_epochs = 150;
  double retrain_learning_rate = 1.0;
};

struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 7;
  CorpusSection corpus;
  PipelineSection pipeline;
  ModelSection model;
  TrainSection train;
  DetectSection detect;
  EvalSection eval;
  FeedbackSection feedback;
};

// Strict: unknown keys and wrong types raise ConfigError naming the key.
RunConfig run_config_from_json(const Json& j);
OrderedJson run_config_to_json(const RunConfig& config);
// Reads `path` (empty = defaults) and applies the FRFORGE_SEED override.
RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& config);

}  // namespace frforge::cli
