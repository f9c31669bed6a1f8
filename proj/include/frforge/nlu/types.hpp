#pragma once

#include <vector>

#include "frforge/corpus/corpus.hpp"

namespace frforge::nlu {

using corpus::DomainId;

struct Hypothesis {
  DomainId domain_id = 0;
  int intent_id = 0;
  double score = 0.0;  // in [0, 1]

  bool operator==(const Hypothesis&) const = default;
};

// Reranker output. Scores non-increasing, domain ids pairwise distinct.
struct NBestList {
  std::vector<Hypothesis> hypotheses;

  bool empty() const { return hypotheses.empty(); }
  std::size_t size() const { return hypotheses.size(); }
  bool operator==(const NBestList&) const = default;
};

// routed_domain is always nbest.hypotheses[0].domain_id.
struct RoutingRecord {
  corpus::Utterance utterance;
  NBestList nbest;
  DomainId routed_domain = 0;

  bool operator==(const RoutingRecord&) const = default;
};

// Throws ContractError if the list breaks ordering, range, or distinctness.
void check_nbest(const NBestList& nbest);

Json nbest_to_json(const NBestList& nbest);
NBestList nbest_from_json(const Json& j, const std::string& path, std::size_t line);

}  // namespace frforge::nlu
