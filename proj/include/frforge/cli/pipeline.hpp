#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "frforge/cli/run_config.hpp"
#include "frforge/eval/eval.hpp"

namespace frforge::cli {

// Artifact layout under one run directory. Each stage reads the outputs of
// the stages before it and fails with ConfigError naming the producing
// subcommand when they are missing.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path corpus() const { return root / "corpus" / "corpus.jsonl"; }
  std::filesystem::path traffic() const { return root / "corpus" / "traffic.jsonl"; }
  std::filesystem::path pool() const { return root / "corpus" / "pool.jsonl"; }
  std::filesystem::path heldout() const { return root / "corpus" / "heldout.jsonl"; }
  std::filesystem::path spec() const { return root / "corpus" / "spec.json"; }
  std::filesystem::path production() const { return root / "nlu" / "production.json"; }
  std::filesystem::path calibration() const { return root / "nlu" / "calibration.json"; }
  std::filesystem::path logs() const { return root / "nlu" / "logs.jsonl"; }
  std::filesystem::path pool_logs() const { return root / "nlu" / "pool_logs.jsonl"; }
  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path encoder() const { return root / "models" / "encoder"; }
  std::filesystem::path member(models::ModelKind kind, std::uint64_t seed) const;
  std::filesystem::path training() const { return root / "models" / "training.json"; }
  std::filesystem::path scores() const { return root / "detect" / "scores.jsonl"; }
  std::filesystem::path candidates() const { return root / "detect" / "candidates.jsonl"; }
  std::filesystem::path detect_summary() const { return root / "detect" / "summary.json"; }
  std::filesystem::path member_candidates(std::uint64_t seed) const {
    return root / "detect" / "members" / ("seed" + std::to_string(seed) + ".candidates.jsonl");
  }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path annotations() const { return root / "feedback" / "annotations.jsonl"; }
  std::filesystem::path feedback_report() const { return root / "feedback" / "feedback_report.json"; }
  std::filesystem::path retrained_production() const { return root / "feedback" / "production_retrained.json"; }
  std::filesystem::path manifest() const { return root / "run_manifest.json"; }
};

void stage_gen_corpus(const RunConfig& config, const RunPaths& paths);
void stage_simulate(const RunConfig& config, const RunPaths& paths);
void stage_build_dataset(const RunConfig& config, const RunPaths& paths);
void stage_train(const RunConfig& config, const RunPaths& paths);
void stage_detect(const RunConfig& config, const RunPaths& paths);
eval::DetectionReport stage_evaluate(const RunConfig& config, const RunPaths& paths);
Json stage_feedback(const RunConfig& config, const RunPaths& paths);

// Every stage in order, then run_manifest.json with artifact digests.
void run_all(const RunConfig& config, const RunPaths& paths);

// Digest of every regular file under `root` except the manifest, keyed by relative path.
OrderedJson artifact_digests(const std::filesystem::path& root);

// Seed used to fine-tune one ensemble member.
std::uint64_t member_seed(const RunConfig& config, models::ModelKind kind, std::uint64_t seed);

// Head the detection rule reads for a kind: fr when the model has one.
models::Head detection_head(models::ModelKind kind);

}  // namespace frforge::cli
