#include "frforge/feedback/feedback.hpp"

#include <ctime>
#include <fstream>
#include <unordered_map>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::feedback {

std::string_view to_string(Verdict v) { return v == Verdict::fr ? "fr" : "not_fr"; }

Verdict verdict_from_string(std::string_view name) {
  if (name == "fr") return Verdict::fr;
  if (name == "not_fr") return Verdict::not_fr;
  throw ContractError("unknown verdict '" + std::string(name) + "'");
}

std::string_view to_string(Source s) { return s == Source::oracle ? "oracle" : "human"; }

Source source_from_string(std::string_view name) {
  if (name == "oracle") return Source::oracle;
  if (name == "human") return Source::human;
  throw ContractError("unknown annotation source '" + std::string(name) + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<Annotation> oracle_annotate(const std::vector<detector::ScoredRecord>& candidates,
                                        const std::vector<nlu::RoutingRecord>& pool, corpus::DomainId target,
                                        double error_rate, std::uint64_t seed) {
  if (!(error_rate >= 0.0 && error_rate < 0.5)) throw ConfigError("oracle error rate must be in [0, 0.5)");
  std::unordered_map<std::string, const nlu::RoutingRecord*> by_id;
  for (const auto& r : pool) by_id.emplace(r.utterance.id, &r);
  std::vector<Annotation> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto it = by_id.find(c.id);
    if (it == by_id.end()) throw ContractError("candidate " + c.id + " is not in the pool");
    const auto& r = *it->second;
    bool fr = r.utterance.true_domain == target && r.routed_domain != target;
    Rng rng(derive_seed(seed, c.id));
    if (rng.bernoulli(error_rate)) fr = !fr;
    out.push_back({c.id, fr ? Verdict::fr : Verdict::not_fr, Source::oracle, std::nullopt});
  }
  return out;
}

double enrichment_factor(std::size_t confirmed, std::size_t candidates, std::size_t pool_false_rejects,
                         std::size_t pool_size) {
  if (candidates == 0) throw ContractError("enrichment needs at least one reviewed candidate");
  if (pool_false_rejects == 0 || pool_size == 0) throw ContractError("enrichment needs a pool with false rejects");
  const double precision = static_cast<double>(confirmed) / static_cast<double>(candidates);
  const double prevalence = static_cast<double>(pool_false_rejects) / static_cast<double>(pool_size);
  return precision / prevalence;
}

RetrainOutcome retrain_and_measure(const nlu::DomainModelParams& production, const std::vector<corpus::Utterance>& corpus,
                                   const std::vector<corpus::Utterance>& confirmed,
                                   const std::vector<corpus::Utterance>& heldout,
                                   const nlu::PerturbationConfig& perturbation, int n, corpus::DomainId target,
                                   const RetrainConfig& config) {
  if (confirmed.empty()) throw ContractError("retraining needs at least one confirmed false reject");
  RetrainOutcome out;
  out.confirmed = confirmed.size();
  out.production_digest_before = production.digest();
  for (const auto& u : heldout) out.heldout_target += u.true_domain == target;
  out.heldout_fr_before = nlu::false_reject_count(nlu::simulate(production, heldout, perturbation, n, target), target);
  out.retrained = production;
  std::vector<corpus::Utterance> positives = confirmed;
  for (auto& u : positives) u.true_domain = target;
  nlu::retrain_domain_classifier(out.retrained, target, corpus, positives, config.production, config.warm_start);
  out.heldout_fr_after =
      nlu::false_reject_count(nlu::simulate(out.retrained, heldout, perturbation, n, target), target);
  out.production_digest_after = out.retrained.digest();
  return out;
}

double RetrainOutcome::relative_reduction() const {
  if (heldout_fr_before == 0) return 0.0;
  return (static_cast<double>(heldout_fr_before) - static_cast<double>(heldout_fr_after)) /
         static_cast<double>(heldout_fr_before);
}

Json annotation_to_json(const Annotation& a) {
  return {{"id", a.id},
          {"verdict", std::string(to_string(a.verdict))},
          {"source", std::string(to_string(a.source))},
          {"timestamp", a.timestamp ? Json(*a.timestamp) : Json(nullptr)}};
}

Annotation annotation_from_json(const Json& j, const std::string& path, std::size_t line) {
  require_known_fields(j, {"id", "verdict", "source", "timestamp"}, path, line);
  Annotation a;
  a.id = j.at("id").get<std::string>();
  try {
    a.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    a.source = source_from_string(j.at("source").get<std::string>());
  } catch (const ContractError& e) {
    throw ParseError(path, line, e.what());
  }
  if (j.contains("timestamp") && !j.at("timestamp").is_null()) a.timestamp = j.at("timestamp").get<std::string>();
  return a;
}

void append_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  for (const auto& a : annotations) out << annotation_to_json(a).dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::vector<Annotation> out;
  if (!std::filesystem::exists(path)) return out;
  read_jsonl(path, [&](const Json& j, std::size_t line) { out.push_back(annotation_from_json(j, path.string(), line)); });
  return out;
}

}  // namespace frforge::feedback
