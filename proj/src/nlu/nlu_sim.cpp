#include "frforge/nlu/nlu_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"

namespace frforge::nlu {
namespace {

using corpus::Utterance;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Distinct non-reserved feature ids of an utterance.
std::vector<int> features(const corpus::Vocabulary& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  for (const auto& t : tokens) {
    const int id = vocab.id(t);
    if (id >= corpus::kNumReserved) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Weighted logistic regression by full-batch gradient descent.
void fit_binary(std::vector<double>& w, double& b, const std::vector<std::vector<int>>& x,
                const std::vector<int>& y, const ProductionTrainConfig& cfg) {
  const auto n = static_cast<double>(x.size());
  const double n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double n_neg = n - n_pos;
  double c_pos = 1.0, c_neg = 1.0;
  if (cfg.balance_classes && n_pos > 0 && n_neg > 0) {
    c_pos = n / (2.0 * n_pos);
    c_neg = n / (2.0 * n_neg);
  }
  std::vector<double> grad(w.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = b;
      for (int f : x[i]) z += w[static_cast<std::size_t>(f)];
      const double r = (y[i] ? c_pos : c_neg) * (sigmoid(z) - y[i]);
      for (int f : x[i]) grad[static_cast<std::size_t>(f)] += r;
      grad_b += r;
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= cfg.learning_rate * (grad[k] / n + cfg.l2 * w[k]);
    }
    b -= cfg.learning_rate * grad_b / n;
  }
}

// Balanced multinomial logistic regression, row-major weights (classes x dim).
void fit_multiclass(std::vector<double>& w, std::vector<double>& b, int classes, std::size_t dim,
                    const std::vector<std::vector<int>>& x, const std::vector<int>& y,
                    const ProductionTrainConfig& cfg) {
  const auto n = static_cast<double>(x.size());
  std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
  for (int c : y) count[static_cast<std::size_t>(c)] += 1.0;
  int present = 0;
  for (double c : count) present += c > 0;
  std::vector<double> weight(static_cast<std::size_t>(classes), 1.0);
  if (cfg.balance_classes) {
    for (std::size_t c = 0; c < weight.size(); ++c) {
      weight[c] = count[c] > 0 ? n / (present * count[c]) : 0.0;
    }
  }
  std::vector<double> grad(w.size()), grad_b(b.size()), p(static_cast<std::size_t>(classes));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double zmax = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < classes; ++c) {
        double z = b[static_cast<std::size_t>(c)];
        for (int f : x[i]) z += w[static_cast<std::size_t>(c) * dim + static_cast<std::size_t>(f)];
        p[static_cast<std::size_t>(c)] = z;
        zmax = std::max(zmax, z);
      }
      double total = 0.0;
      for (auto& v : p) total += (v = std::exp(v - zmax));
      const double cw = weight[static_cast<std::size_t>(y[i])];
      for (int c = 0; c < classes; ++c) {
        const double r = cw * (p[static_cast<std::size_t>(c)] / total - (c == y[i] ? 1.0 : 0.0));
        for (int f : x[i]) grad[static_cast<std::size_t>(c) * dim + static_cast<std::size_t>(f)] += r;
        grad_b[static_cast<std::size_t>(c)] += r;
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= cfg.learning_rate * (grad[k] / n + cfg.l2 * w[k]);
    }
    for (std::size_t c = 0; c < b.size(); ++c) b[c] -= cfg.learning_rate * grad_b[c] / n;
  }
}

void pad_weights(DomainModelParams& params) {
  const auto dim = static_cast<std::size_t>(params.vocab.size());
  for (auto& d : params.domains) {
    if (d.weights.size() == dim) continue;
    const std::size_t old = d.weights.size();
    d.weights.resize(dim, 0.0);
    std::vector<double> iw(static_cast<std::size_t>(d.num_intents + 1) * dim, 0.0);
    for (int c = 0; c <= d.num_intents; ++c) {
      std::copy_n(d.intent_weights.begin() + static_cast<std::ptrdiff_t>(c * old), old,
                  iw.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * dim));
    }
    d.intent_weights = std::move(iw);
  }
}

}  // namespace

std::uint64_t DomainModelParams::digest() const {
  std::uint64_t h = vocab.digest();
  auto mix = [&h](const std::vector<double>& v) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)), h);
  };
  for (const auto& d : domains) {
    mix(d.weights);
    mix({d.bias});
    mix(d.intent_weights);
    mix(d.intent_bias);
  }
  return h;
}

DomainModelParams train_production_models(const std::vector<Utterance>& corpus, int num_domains,
                                          const ProductionTrainConfig& config) {
  if (num_domains < 2) throw ConfigError("production models need at least 2 domains");
  std::vector<int> per_domain(static_cast<std::size_t>(num_domains), 0);
  std::vector<int> intents(static_cast<std::size_t>(num_domains), 0);
  for (const auto& u : corpus) {
    if (u.true_domain < 0 || u.true_domain >= num_domains) {
      throw ConfigError("utterance " + u.id + " has out-of-range domain");
    }
    per_domain[static_cast<std::size_t>(u.true_domain)]++;
    auto& k = intents[static_cast<std::size_t>(u.true_domain)];
    k = std::max(k, u.true_intent + 1);
  }
  if (std::count_if(per_domain.begin(), per_domain.end(), [](int c) { return c > 0; }) < 2) {
    throw ConfigError("production training corpus covers fewer than 2 domains");
  }

  DomainModelParams params;
  params.seed = config.seed;
  std::vector<std::vector<std::string>> texts;
  texts.reserve(corpus.size());
  for (const auto& u : corpus) texts.push_back(u.text);
  params.vocab = corpus::Vocabulary::build(texts);
  const auto dim = static_cast<std::size_t>(params.vocab.size());

  std::vector<std::vector<int>> x;
  x.reserve(corpus.size());
  for (const auto& u : corpus) x.push_back(features(params.vocab, u.text));

  params.domains.resize(static_cast<std::size_t>(num_domains));
  for (int d = 0; d < num_domains; ++d) {
    auto& model = params.domains[static_cast<std::size_t>(d)];
    model.weights.assign(dim, 0.0);
    std::vector<int> y;
    y.reserve(corpus.size());
    for (const auto& u : corpus) y.push_back(u.true_domain == d ? 1 : 0);
    fit_binary(model.weights, model.bias, x, y, config);

    model.num_intents = std::max(1, intents[static_cast<std::size_t>(d)]);
    const int classes = model.num_intents + 1;
    model.intent_weights.assign(static_cast<std::size_t>(classes) * dim, 0.0);
    model.intent_bias.assign(static_cast<std::size_t>(classes), 0.0);
    std::vector<int> yi;
    yi.reserve(corpus.size());
    for (const auto& u : corpus) yi.push_back(u.true_domain == d ? u.true_intent : model.num_intents);
    fit_multiclass(model.intent_weights, model.intent_bias, classes, dim, x, yi, config);
  }
  return params;
}

void retrain_domain_classifier(DomainModelParams& params, DomainId domain,
                               const std::vector<Utterance>& corpus,
                               const std::vector<Utterance>& extra_positives,
                               const ProductionTrainConfig& config, bool warm_start) {
  if (domain < 0 || domain >= params.num_domains()) throw ContractError("domain out of range");
  std::vector<std::vector<std::string>> texts;
  for (const auto& u : extra_positives) texts.push_back(u.text);
  params.vocab = params.vocab.extended(texts);
  pad_weights(params);

  std::vector<std::vector<int>> x;
  std::vector<int> y;
  for (const auto& u : corpus) {
    x.push_back(features(params.vocab, u.text));
    y.push_back(u.true_domain == domain ? 1 : 0);
  }
  for (const auto& u : extra_positives) {
    x.push_back(features(params.vocab, u.text));
    y.push_back(1);
  }
  auto& model = params.domains[static_cast<std::size_t>(domain)];
  if (!warm_start) {
    std::fill(model.weights.begin(), model.weights.end(), 0.0);
    model.bias = 0.0;
  }
  fit_binary(model.weights, model.bias, x, y, config);
}

std::vector<double> domain_scores(const DomainModelParams& params,
                                  const std::vector<std::string>& tokens) {
  const auto x = features(params.vocab, tokens);
  std::vector<double> out;
  out.reserve(params.domains.size());
  for (const auto& d : params.domains) {
    double z = d.bias;
    for (int f : x) z += d.weights[static_cast<std::size_t>(f)];
    out.push_back(sigmoid(z));
  }
  return out;
}

std::vector<std::vector<double>> intent_scores(const DomainModelParams& params,
                                               const std::vector<std::string>& tokens) {
  const auto x = features(params.vocab, tokens);
  const auto dim = static_cast<std::size_t>(params.vocab.size());
  std::vector<std::vector<double>> out;
  out.reserve(params.domains.size());
  for (const auto& d : params.domains) {
    const int classes = d.num_intents + 1;
    std::vector<double> z(static_cast<std::size_t>(classes));
    double zmax = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      double v = d.intent_bias[static_cast<std::size_t>(c)];
      for (int f : x) v += d.intent_weights[static_cast<std::size_t>(c) * dim + static_cast<std::size_t>(f)];
      z[static_cast<std::size_t>(c)] = v;
      zmax = std::max(zmax, v);
    }
    double total = 0.0;
    for (auto& v : z) total += (v = std::exp(v - zmax));
    z.resize(static_cast<std::size_t>(d.num_intents));  // drop the out-of-domain class
    for (auto& v : z) v /= total;
    out.push_back(std::move(z));
  }
  return out;
}

NBestList rerank(std::span<const double> domain_scores,
                 const std::vector<std::vector<double>>& intent_scores,
                 const PerturbationConfig& perturbation, int n, DomainId target,
                 std::uint64_t noise_key) {
  const int m = static_cast<int>(domain_scores.size());
  if (n < 1 || n > m) {
    throw ConfigError("n-best size " + std::to_string(n) + " must be in [1, " + std::to_string(m) + "]");
  }
  if (perturbation.noise_sigma < 0) throw ConfigError("noise_sigma must be non-negative");
  if (!intent_scores.empty() && static_cast<int>(intent_scores.size()) != m) {
    throw ContractError("intent scores cover a different number of domains");
  }
  Rng noise(derive_seed(perturbation.seed, noise_key));
  struct Entry {
    double combined;
    int domain;
    int intent;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(m));
  for (int d = 0; d < m; ++d) {
    double best = 0.0;
    int best_intent = 0;
    if (!intent_scores.empty()) {
      const auto& is = intent_scores[static_cast<std::size_t>(d)];
      for (std::size_t k = 0; k < is.size(); ++k) {
        if (k == 0 || is[k] > best) best = is[k], best_intent = static_cast<int>(k);
      }
    }
    double s = domain_scores[static_cast<std::size_t>(d)] + best;
    if (d == target) s += perturbation.target_bias;
    const double z = noise.normal();
    if (perturbation.noise_sigma > 0) s += perturbation.noise_sigma * z;
    entries.push_back({s, d, best_intent});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.combined != b.combined ? a.combined > b.combined : a.domain < b.domain;
  });
  const double top = entries.front().combined;
  double total = 0.0;
  for (const auto& e : entries) total += std::exp(e.combined - top);

  NBestList out;
  for (int i = 0; i < n; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    out.hypotheses.push_back({e.domain, e.intent, quantize_sig9(std::exp(e.combined - top) / total)});
  }
  return out;
}

RoutingRecord route(const Utterance& utterance, NBestList nbest) {
  if (nbest.empty()) throw ContractError("cannot route utterance " + utterance.id + ": empty n-best");
  RoutingRecord r;
  r.utterance = utterance;
  r.routed_domain = nbest.hypotheses.front().domain_id;
  r.nbest = std::move(nbest);
  return r;
}

std::uint64_t noise_key_for(std::string_view utterance_id) { return fnv1a64(utterance_id); }

std::vector<EntitySpan> recognize_entities(const Utterance&) { return {}; }

std::vector<RoutingRecord> simulate(const DomainModelParams& params, const std::vector<Utterance>& traffic,
                                    const PerturbationConfig& perturbation, int n, DomainId target) {
  std::vector<RoutingRecord> out;
  out.reserve(traffic.size());
  for (const auto& u : traffic) {
    const auto ds = domain_scores(params, u.text);
    const auto is = intent_scores(params, u.text);
    out.push_back(route(u, rerank(ds, is, perturbation, n, target, noise_key_for(u.id))));
  }
  return out;
}

std::size_t false_reject_count(const std::vector<RoutingRecord>& records, DomainId target) {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.utterance.true_domain == target && r.routed_domain != target;
  }));
}

double false_reject_rate(const std::vector<RoutingRecord>& records, DomainId target) {
  const auto in_domain = std::count_if(records.begin(), records.end(),
                                       [&](const auto& r) { return r.utterance.true_domain == target; });
  if (in_domain == 0) return 0.0;
  return static_cast<double>(false_reject_count(records, target)) / static_cast<double>(in_domain);
}

Calibration calibrate_target_bias(const DomainModelParams& params, const std::vector<Utterance>& traffic,
                                  PerturbationConfig perturbation, int n, DomainId target,
                                  double requested_rate, int max_iterations) {
  if (!(requested_rate > 0.0 && requested_rate < 1.0)) {
    throw ConfigError("requested false-reject rate must be in (0,1)");
  }
  // Only target-domain utterances influence the rate; cache their scores.
  struct Cached {
    const Utterance* u;
    std::vector<double> ds;
    std::vector<std::vector<double>> is;
  };
  std::vector<Cached> cache;
  for (const auto& u : traffic) {
    if (u.true_domain == target) cache.push_back({&u, domain_scores(params, u.text), intent_scores(params, u.text)});
  }
  if (cache.empty()) throw ConfigError("calibration traffic has no target-domain utterances");

  auto rate_at = [&](double bias) {
    perturbation.target_bias = bias;
    std::size_t fr = 0;
    for (const auto& c : cache) {
      fr += rerank(c.ds, c.is, perturbation, n, target, noise_key_for(c.u->id)).hypotheses[0].domain_id != target;
    }
    return static_cast<double>(fr) / static_cast<double>(cache.size());
  };

  Calibration best{0.0, rate_at(0.0), 0};
  if (best.achieved_rate >= requested_rate) return best;

  double lo = 0.0;  // rate below requested
  double hi = -1.0;
  double hi_rate = rate_at(hi);
  while (hi_rate < requested_rate && hi > -1e6) {
    lo = hi;
    hi *= 2.0;
    hi_rate = rate_at(hi);
  }
  auto consider = [&](double bias, double rate, int it) {
    if (std::abs(rate - requested_rate) < std::abs(best.achieved_rate - requested_rate)) {
      best = {bias, rate, it};
    }
  };
  consider(hi, hi_rate, 0);
  for (int it = 1; it <= max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate_at(mid);
    consider(mid, r, it);
    if (r < requested_rate) lo = mid;
    else hi = mid;
  }
  return best;
}

Json routing_record_to_json(const RoutingRecord& r) {
  Json j = Json::object();
  j["utterance"] = corpus::utterance_to_json(r.utterance);
  j["nbest"] = nbest_to_json(r.nbest);
  j["routed_domain"] = r.routed_domain;
  return j;
}

RoutingRecord routing_record_from_json(const Json& j, const std::string& path, std::size_t line) {
  require_known_fields(j, {"utterance", "nbest", "routed_domain"}, path, line);
  for (auto key : {"utterance", "nbest", "routed_domain"}) {
    if (!j.contains(key)) throw ParseError(path, line, std::string("missing field '") + key + "'");
  }
  RoutingRecord r;
  r.utterance = corpus::utterance_from_json(j.at("utterance"), path, line);
  r.nbest = nbest_from_json(j.at("nbest"), path, line);
  r.routed_domain = j.at("routed_domain").get<int>();
  if (r.nbest.empty() || r.nbest.hypotheses[0].domain_id != r.routed_domain) {
    throw ParseError(path, line, "routed_domain differs from the top hypothesis");
  }
  return r;
}

void write_logs(const std::filesystem::path& path, const std::vector<RoutingRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += routing_record_to_json(r).dump();
    out.push_back('\n');
  }
  write_text_file(path, out);
}

std::vector<RoutingRecord> read_logs(const std::filesystem::path& path) {
  std::vector<RoutingRecord> out;
  read_jsonl(path, [&](const Json& j, std::size_t line) {
    out.push_back(routing_record_from_json(j, path.string(), line));
  });
  return out;
}

void save_production_models(const std::filesystem::path& path, const DomainModelParams& params) {
  Json j;
  j["schema_version"] = 1;
  j["seed"] = params.seed;
  j["vocab"] = Json::array();
  j["vocab"] = params.vocab.tokens();
  j["domains"] = Json::array();
  for (const auto& d : params.domains) {
    j["domains"].push_back({{"weights", d.weights},
                            {"bias", d.bias},
                            {"num_intents", d.num_intents},
                            {"intent_weights", d.intent_weights},
                            {"intent_bias", d.intent_bias}});
  }
  write_text_file(path, j.dump());
}

DomainModelParams load_production_models(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
    DomainModelParams p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.vocab = corpus::Vocabulary::from_tokens(j.at("vocab").get<std::vector<std::string>>());
    for (const auto& dj : j.at("domains")) {
      DomainModel d;
      d.weights = dj.at("weights").get<std::vector<double>>();
      d.bias = dj.at("bias").get<double>();
      d.num_intents = dj.at("num_intents").get<int>();
      d.intent_weights = dj.at("intent_weights").get<std::vector<double>>();
      d.intent_bias = dj.at("intent_bias").get<std::vector<double>>();
      p.domains.push_back(std::move(d));
    }
    return p;
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace frforge::nlu
