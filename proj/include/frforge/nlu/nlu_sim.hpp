#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frforge/corpus/vocab.hpp"
#include "frforge/nlu/types.hpp"

namespace frforge::nlu {

// Maximum-entropy production models over binary bag-of-words features.
struct DomainModel {
  std::vector<double> weights;  // vocabulary size
  double bias = 0.0;
  // Multi-class intent model: classes are the domain's intents followed by
  // one out-of-domain class. Row-major (num_classes x vocabulary size).
  int num_intents = 0;
  std::vector<double> intent_weights;
  std::vector<double> intent_bias;

  bool operator==(const DomainModel&) const = default;
};

struct DomainModelParams {
  corpus::Vocabulary vocab;
  std::vector<DomainModel> domains;
  std::uint64_t seed = 0;

  int num_domains() const { return static_cast<int>(domains.size()); }
  std::uint64_t digest() const;
};

struct ProductionTrainConfig {
  int epochs = 150;
  double learning_rate = 1.0;
  double l2 = 1e-4;
  // Reweight one-vs-all positives so both classes carry equal total weight.
  bool balance_classes = true;
  std::uint64_t seed = 0;
};

struct PerturbationConfig {
  double target_bias = 0.0;  // <= 0, added to the target domain's combined score
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

DomainModelParams train_production_models(const std::vector<corpus::Utterance>& corpus,
                                          int num_domains, const ProductionTrainConfig& config);

// Continues (warm_start) or restarts training of one domain's one-vs-all
// classifier on `corpus` plus `extra_positives`. Other domains are untouched.
void retrain_domain_classifier(DomainModelParams& params, DomainId domain,
                               const std::vector<corpus::Utterance>& corpus,
                               const std::vector<corpus::Utterance>& extra_positives,
                               const ProductionTrainConfig& config, bool warm_start);

// One-vs-all probability per domain.
std::vector<double> domain_scores(const DomainModelParams& params,
                                  const std::vector<std::string>& tokens);
// Per domain, the probabilities of that domain's intents.
std::vector<std::vector<double>> intent_scores(const DomainModelParams& params,
                                               const std::vector<std::string>& tokens);

// Combines scores (domain + best intent, plus target bias and noise), sorts
// descending with ascending-id tie-break, softmax-normalizes, and keeps the top n.
// `noise_key` selects the per-utterance noise stream.
NBestList rerank(std::span<const double> domain_scores,
                 const std::vector<std::vector<double>>& intent_scores,
                 const PerturbationConfig& perturbation, int n, DomainId target,
                 std::uint64_t noise_key = 0);

RoutingRecord route(const corpus::Utterance& utterance, NBestList nbest);

std::uint64_t noise_key_for(std::string_view utterance_id);

// Named entities are not consumed downstream; always empty.
struct EntitySpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string label;
};
std::vector<EntitySpan> recognize_entities(const corpus::Utterance& utterance);

std::vector<RoutingRecord> simulate(const DomainModelParams& params,
                                    const std::vector<corpus::Utterance>& traffic,
                                    const PerturbationConfig& perturbation, int n, DomainId target);

// Fraction of target-domain utterances routed elsewhere.
double false_reject_rate(const std::vector<RoutingRecord>& records, DomainId target);
std::size_t false_reject_count(const std::vector<RoutingRecord>& records, DomainId target);

struct Calibration {
  double target_bias = 0.0;
  double achieved_rate = 0.0;
  int iterations = 0;
};

// Bisection on target_bias (<= 0) until the measured false-reject rate over
// `traffic` is as close as possible to `requested_rate`.
Calibration calibrate_target_bias(const DomainModelParams& params,
                                  const std::vector<corpus::Utterance>& traffic,
                                  PerturbationConfig perturbation, int n, DomainId target,
                                  double requested_rate, int max_iterations = 60);

Json routing_record_to_json(const RoutingRecord& r);
RoutingRecord routing_record_from_json(const Json& j, const std::string& path, std::size_t line);
void write_logs(const std::filesystem::path& path, const std::vector<RoutingRecord>& records);
std::vector<RoutingRecord> read_logs(const std::filesystem::path& path);

void save_production_models(const std::filesystem::path& path, const DomainModelParams& params);
DomainModelParams load_production_models(const std::filesystem::path& path);

}  // namespace frforge::nlu
