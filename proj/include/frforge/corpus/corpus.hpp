#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "frforge/common/io.hpp"

namespace frforge::corpus {

using DomainId = int;

struct IntentSpec {
  std::string name;
  // Templates reference slots as {slot} and the carrier phrase as {carrier}.
  std::vector<std::string> templates;
  std::vector<std::string> carriers;
};

struct SlotSpec {
  std::vector<std::string> values;  // explicit values, always included
  int generated = 0;                // extra pseudo-word entity names
  double shared_fraction = 0.0;     // of generated names, share taken from the global ambiguous pool
};

struct DomainSpec {
  DomainId domain_id = 0;
  std::string name;
  double traffic_share = 0.0;
  double overlap_coefficient = 0.0;
  std::vector<IntentSpec> intents;
  std::map<std::string, SlotSpec> slots;
};

struct CorpusSpec {
  int schema_version = 1;
  DomainId target_domain = 0;
  std::uint64_t vocab_seed = 1;
  int shared_entity_pool = 0;
  double zipf_exponent = 1.0;
  std::vector<std::string> shared_carriers;
  std::vector<DomainSpec> domains;

  int num_domains() const { return static_cast<int>(domains.size()); }
};

struct Utterance {
  std::string id;
  std::vector<std::string> text;
  DomainId true_domain = 0;
  int true_intent = 0;

  bool operator==(const Utterance&) const = default;
};

// Throws ConfigError describing the first violated invariant.
void validate(const CorpusSpec& spec);

CorpusSpec corpus_spec_from_json(const Json& j);
Json corpus_spec_to_json(const CorpusSpec& spec);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);

// The desk benchmark: 8 domains, target share 0.4%.
CorpusSpec default_corpus_spec();

// Slot vocabularies after pseudo-word expansion; depends only on the spec.
struct ExpandedSlots {
  // [domain][slot name] -> values
  std::vector<std::map<std::string, std::vector<std::string>>> values;
};
ExpandedSlots expand_slots(const CorpusSpec& spec);

// Pure function of (spec, n, seed, id_prefix).
std::vector<Utterance> generate_corpus(const CorpusSpec& spec, std::size_t n_utterances,
                                       std::uint64_t seed, const std::string& id_prefix = "u");

std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

Json utterance_to_json(const Utterance& u);
Utterance utterance_from_json(const Json& j, const std::string& path = "<json>",
                              std::size_t line = 0);

void write_corpus(const std::filesystem::path& path, const std::vector<Utterance>& corpus);
std::vector<Utterance> read_corpus(const std::filesystem::path& path);

}  // namespace frforge::corpus
