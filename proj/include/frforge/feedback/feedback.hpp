#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "frforge/detector/detector.hpp"
#include "frforge/nlu/nlu_sim.hpp"

namespace frforge::feedback {

enum class Verdict { fr, not_fr };
enum class Source { oracle, human };

std::string_view to_string(Verdict v);
// Throws ContractError for anything other than "fr" or "not_fr".
Verdict verdict_from_string(std::string_view name);
std::string_view to_string(Source s);
Source source_from_string(std::string_view name);

struct Annotation {
  std::string id;
  Verdict verdict = Verdict::not_fr;
  Source source = Source::oracle;
  std::optional<std::string> timestamp;  // UTC, ISO 8601; oracle verdicts carry none

  bool operator==(const Annotation&) const = default;
};

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

// Simulated reviewer: the ground-truth verdict, flipped with probability
// `error_rate` on a per-id stream. error_rate must be in [0, 0.5).
std::vector<Annotation> oracle_annotate(const std::vector<detector::ScoredRecord>& candidates,
                                        const std::vector<nlu::RoutingRecord>& pool, corpus::DomainId target,
                                        double error_rate, std::uint64_t seed);

// Candidate precision divided by the false-reject prevalence of the pool.
// Throws ContractError when nothing was reviewed or the pool has no false rejects.
double enrichment_factor(std::size_t confirmed, std::size_t candidates, std::size_t pool_false_rejects,
                         std::size_t pool_size);

struct RetrainConfig {
  nlu::ProductionTrainConfig production;
  bool warm_start = true;
};

struct RetrainOutcome {
  std::size_t confirmed = 0;
  std::size_t heldout_target = 0;
  std::size_t heldout_fr_before = 0;
  std::size_t heldout_fr_after = 0;
  std::uint64_t production_digest_before = 0;
  std::uint64_t production_digest_after = 0;
  nlu::DomainModelParams retrained;

  // (before - after) / before; 0 when there were no false rejects before.
  double relative_reduction() const;
};

// Adds the confirmed utterances as target-domain positives, retrains the
// target classifier and re-simulates `heldout` under the same perturbation.
// Throws ContractError when `confirmed` is empty.
RetrainOutcome retrain_and_measure(const nlu::DomainModelParams& production, const std::vector<corpus::Utterance>& corpus,
                                   const std::vector<corpus::Utterance>& confirmed,
                                   const std::vector<corpus::Utterance>& heldout,
                                   const nlu::PerturbationConfig& perturbation, int n, corpus::DomainId target,
                                   const RetrainConfig& config);

Json annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const Json& j, const std::string& path, std::size_t line);
// Append-only log; one annotation per line.
void append_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations);
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

}  // namespace frforge::feedback
