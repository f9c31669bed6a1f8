#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "frforge/corpus/vocab.hpp"
#include "frforge/models/network.hpp"

namespace frforge::models {

struct ModelBundle {
  ModelConfig config;
  ParamStore params;
  corpus::Vocabulary vocab;
  Json provenance = Json::object();
};

// Checkpoint files plus model.json and vocab.txt in one directory.
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle, std::int64_t step);
ModelBundle load_bundle(const std::filesystem::path& dir);

ModelInput make_input(const corpus::Vocabulary& vocab, const std::vector<std::string>& text,
                      const nlu::NBestList& nbest);

enum class Head { domain, fr };

std::string_view to_string(Head head);
Head head_from_string(std::string_view name);

struct HeadProbabilities {
  double p_domain = 0.0;
  std::optional<double> p_fr;
};

// Inference-mode probabilities for every input, in input order.
std::vector<HeadProbabilities> predict(const ModelConfig& config, const ParamStore& params,
                                       std::span<const ModelInput> inputs, std::size_t batch_size = 256);

// Probability from one head. Throws ContractError for the fr head of a single-task model.
double head_probability(const HeadProbabilities& probs, Head head);

struct PretrainConfig {
  int epochs = 2;
  int batch_size = 64;
  double base_lr = 1e-3;
  double warmup_fraction = 0.1;
  double mask_probability = 0.15;
  // Seeded subsample of the sequences when positive.
  int max_sequences = 40000;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  ParamStore encoder;  // "encoder." tensors only
  std::vector<double> epoch_loss;
  std::int64_t steps = 0;
};

// Masked-token pretraining of the transformer encoder on unlabeled sequences.
PretrainResult pretrain_encoder(const TransformerConfig& config, const std::vector<std::vector<int>>& sequences,
                                const PretrainConfig& options);

// Copies every "encoder." tensor of `encoder` into `params`; shapes must match.
void load_encoder_weights(ParamStore& params, const ParamStore& encoder);

}  // namespace frforge::models
