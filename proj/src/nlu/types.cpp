#include "frforge/nlu/types.hpp"

#include <cmath>
#include <set>

#include "frforge/common/error.hpp"

namespace frforge::nlu {

void check_nbest(const NBestList& nbest) {
  std::set<DomainId> seen;
  for (std::size_t i = 0; i < nbest.hypotheses.size(); ++i) {
    const auto& h = nbest.hypotheses[i];
    if (!std::isfinite(h.score) || h.score < 0.0 || h.score > 1.0) {
      throw ContractError("n-best score out of [0,1] at rank " + std::to_string(i));
    }
    if (i > 0 && h.score > nbest.hypotheses[i - 1].score) {
      throw ContractError("n-best scores increase at rank " + std::to_string(i));
    }
    if (h.domain_id < 0 || !seen.insert(h.domain_id).second) {
      throw ContractError("n-best repeats or has invalid domain " + std::to_string(h.domain_id));
    }
  }
}

Json nbest_to_json(const NBestList& nbest) {
  Json arr = Json::array();
  for (const auto& h : nbest.hypotheses) {
    arr.push_back({{"domain_id", h.domain_id}, {"intent_id", h.intent_id}, {"score", h.score}});
  }
  return arr;
}

NBestList nbest_from_json(const Json& j, const std::string& path, std::size_t line) {
  if (!j.is_array()) throw ParseError(path, line, "nbest must be an array");
  NBestList out;
  for (const auto& hj : j) {
    if (!hj.is_object()) throw ParseError(path, line, "hypothesis must be an object");
    require_known_fields(hj, {"domain_id", "intent_id", "score"}, path, line);
    for (auto key : {"domain_id", "intent_id", "score"}) {
      if (!hj.contains(key)) throw ParseError(path, line, std::string("missing field '") + key + "'");
    }
    out.hypotheses.push_back({hj.at("domain_id").get<int>(), hj.at("intent_id").get<int>(),
                              hj.at("score").get<double>()});
  }
  try {
    check_nbest(out);
  } catch (const ContractError& e) {
    throw ParseError(path, line, e.what());
  }
  return out;
}

}  // namespace frforge::nlu
