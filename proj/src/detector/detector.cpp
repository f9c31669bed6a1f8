#include "frforge/detector/detector.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/numeric/optim.hpp"

namespace frforge::detector {

using models::Head;
using models::ModelInput;

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (c.base_lr < 0) throw ConfigError("train.base_lr must be >= 0");
  if (c.warmup_fraction < 0 || c.warmup_fraction > 1) throw ConfigError("train.warmup_fraction must be in [0,1]");
  if (c.w_domain < 0 || c.w_fr < 0) throw ConfigError("loss weights must be >= 0");
}

Json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"batch_size", c.batch_size},
          {"base_lr", c.base_lr}, {"warmup_fraction", c.warmup_fraction},
          {"linear_decay", c.linear_decay}, {"w_domain", c.w_domain},
          {"w_fr", c.w_fr},       {"seed", c.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("train must be an object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "base_lr") c.base_lr = v.get<double>();
      else if (key == "warmup_fraction") c.warmup_fraction = v.get<double>();
      else if (key == "linear_decay") c.linear_decay = v.get<bool>();
      else if (key == "w_domain") c.w_domain = v.get<double>();
      else if (key == "w_fr") c.w_fr = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown key '" + key + "' in train");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

std::int64_t planned_steps(std::size_t n_train, int epochs, int batch_size) {
  const auto b = static_cast<std::size_t>(batch_size);
  return static_cast<std::int64_t>(epochs) * static_cast<std::int64_t>((n_train + b - 1) / b);
}

std::vector<ModelInput> make_inputs(const corpus::Vocabulary& vocab,
                                    const std::vector<corpus::LabeledExample>& examples) {
  std::vector<ModelInput> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(models::make_input(vocab, e.utterance.text, e.nbest));
  return out;
}

std::vector<ModelInput> make_inputs(const corpus::Vocabulary& vocab, const std::vector<nlu::RoutingRecord>& records) {
  std::vector<ModelInput> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(models::make_input(vocab, r.utterance.text, r.nbest));
  return out;
}

namespace {

struct Batch {
  std::vector<ModelInput> inputs;
  std::vector<float> domain_labels;
  std::vector<float> fr_labels;
};

Batch gather(const std::vector<ModelInput>& inputs, const std::vector<corpus::LabeledExample>& examples,
             const std::size_t* idx, std::size_t n) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.inputs.push_back(inputs[idx[i]]);
    b.domain_labels.push_back(static_cast<float>(examples[idx[i]].label_domain));
    b.fr_labels.push_back(static_cast<float>(examples[idx[i]].label_fr));
  }
  return b;
}

double batch_loss(const models::ModelConfig& cfg, const models::ParamStore& params, const Batch& b,
                  const TrainConfig& tc) {
  models::Tape<float> tape(&params, false);
  const auto logits = models::forward(tape, cfg, std::span<const ModelInput>(b.inputs));
  const auto loss = models::multitask_loss(tape, logits, std::span<const float>(b.domain_labels),
                                           std::span<const float>(b.fr_labels), tc.w_domain, tc.w_fr);
  return tape.value(loss)(0, 0);
}

}  // namespace

double evaluate_loss(const models::ModelBundle& bundle, const std::vector<corpus::LabeledExample>& examples,
                     const TrainConfig& config) {
  if (examples.empty()) return 0.0;
  const auto inputs = make_inputs(bundle.vocab, examples);
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t s = 0; s < idx.size(); s += kChunk) {
    const auto n = std::min(kChunk, idx.size() - s);
    total += batch_loss(bundle.config, bundle.params, gather(inputs, examples, idx.data() + s, n), config) *
             static_cast<double>(n);
  }
  return total / static_cast<double>(examples.size());
}

TrainResult train(const corpus::DatasetSplit& data, const models::ModelConfig& model, const corpus::Vocabulary& vocab,
                  const models::ParamStore* pretrained, const TrainConfig& config, const StepObserver& observer) {
  validate(config);
  models::validate(model);
  if (data.train.empty()) throw EmptyDatasetError("training split is empty");
  TrainResult result;
  auto& bundle = result.bundle;
  bundle.config = model;
  bundle.vocab = vocab;
  bundle.params = models::init_params(model, derive_seed(config.seed, "detector-init"));
  if (pretrained != nullptr && models::uses_transformer(model.kind)) {
    models::load_encoder_weights(bundle.params, *pretrained);
  }

  const auto inputs = make_inputs(vocab, data.train);
  const auto total = planned_steps(data.train.size(), config.epochs, config.batch_size);
  numeric::ScheduleConfig schedule{config.base_lr, config.warmup_fraction, total, config.linear_decay};
  numeric::AdamState adam;
  std::vector<std::size_t> order(data.train.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(derive_seed(config.seed, "detector-shuffle"), static_cast<std::uint64_t>(epoch)));
    shuffle.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_index) {
      const auto n = std::min(bs, order.size() - start);
      const auto batch = gather(inputs, data.train, order.data() + start, n);
      ++step;
      double loss_value = 0;
      numeric::Gradients grads;
      try {
        models::Tape<float> tape(&bundle.params, true,
                                 derive_seed(derive_seed(config.seed, "detector-dropout"), static_cast<std::uint64_t>(step)));
        const auto logits = models::forward(tape, model, std::span<const ModelInput>(batch.inputs));
        const auto loss = models::multitask_loss(tape, logits, std::span<const float>(batch.domain_labels),
                                                 std::span<const float>(batch.fr_labels), config.w_domain, config.w_fr);
        tape.backward(loss);
        loss_value = tape.value(loss)(0, 0);
        grads = tape.param_grads();
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch + 1) + ", batch " + std::to_string(batch_index) + "): " + e.what());
      }
      for (const auto& [name, g] : grads) {
        if (!g.allFinite()) {
          throw NumericError("training diverged at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch + 1) + ", batch " + std::to_string(batch_index) +
                             "): non-finite gradient for '" + name + "'");
        }
      }
      numeric::adam_step(bundle.params, grads, adam, numeric::lr_at_step(step, schedule));
      epoch_loss += loss_value * static_cast<double>(n);
      if (observer) observer(step, batch_index, loss_value);
    }
    EpochLog log{epoch + 1, epoch_loss / static_cast<double>(order.size()), evaluate_loss(bundle, data.valid, config)};
    spdlog::info("{} epoch {} train loss {:.4f} valid loss {:.4f}", models::to_string(model.kind), log.epoch,
                 log.train_loss, log.valid_loss);
    result.log.push_back(log);
  }
  result.steps = step;
  bundle.provenance = {{"train", to_json(config)},
                       {"steps", step},
                       {"pretrained_encoder", pretrained != nullptr && models::uses_transformer(model.kind)
                                                  ? Json(hex_digest(pretrained->digest()))
                                                  : Json(nullptr)}};
  return result;
}

std::vector<ScoredRecord> score_pool(const models::ModelBundle& bundle, const std::vector<nlu::RoutingRecord>& pool) {
  const auto& f = bundle.config.fusion;
  for (const auto& r : pool) {
    for (const auto& h : r.nbest.hypotheses) {
      if (models::uses_nbest(bundle.config.kind) && (h.domain_id < 0 || h.domain_id >= f.num_domains)) {
        throw ContractError("record " + r.utterance.id + " names domain " + std::to_string(h.domain_id) +
                            " but the model was built for " + std::to_string(f.num_domains) + " domains");
      }
    }
  }
  const auto inputs = make_inputs(bundle.vocab, pool);
  const auto probs = models::predict(bundle.config, bundle.params, std::span<const ModelInput>(inputs));
  std::vector<ScoredRecord> out;
  out.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ScoredRecord s{pool[i].utterance.id, pool[i].routed_domain, quantize_sig9(probs[i].p_domain), std::nullopt};
    if (probs[i].p_fr) s.p_fr = quantize_sig9(*probs[i].p_fr);
    out.push_back(std::move(s));
  }
  return out;
}

double score_of(const ScoredRecord& r, Head head) {
  if (head == Head::domain) return r.p_domain;
  if (!r.p_fr) throw ContractError("fr head requested but record " + r.id + " has no fr score");
  return *r.p_fr;
}

std::vector<ScoredRecord> filter_candidates(const std::vector<ScoredRecord>& scores, corpus::DomainId target,
                                            double threshold, Head head, std::size_t top_k) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ContractError("threshold must be in [0,1]");
  std::vector<ScoredRecord> out;
  for (const auto& r : scores) {
    if (r.routed_domain != target && score_of(r, head) >= threshold) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [head](const ScoredRecord& a, const ScoredRecord& b) {
    const double sa = score_of(a, head);
    const double sb = score_of(b, head);
    return sa != sb ? sa > sb : a.id < b.id;
  });
  if (top_k > 0 && out.size() > top_k) out.resize(top_k);
  return out;
}

std::vector<ScoredRecord> ensemble_scores(const std::vector<std::vector<ScoredRecord>>& members) {
  if (members.empty()) throw ContractError("ensemble needs at least one member");
  std::map<std::string, std::size_t> first;
  for (std::size_t i = 0; i < members[0].size(); ++i) first.emplace(members[0][i].id, i);
  for (std::size_t m = 1; m < members.size(); ++m) {
    std::set<std::string> a;
    std::set<std::string> b;
    for (const auto& [id, _] : first) a.insert(id);
    for (const auto& r : members[m]) b.insert(r.id);
    if (a != b) {
      std::vector<std::string> diff;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
      std::string listed;
      for (std::size_t i = 0; i < diff.size() && i < 20; ++i) listed += (i ? ", " : "") + diff[i];
      if (diff.size() > 20) listed += ", ...";
      throw ContractError("ensemble member " + std::to_string(m) + " covers different records (" +
                          std::to_string(diff.size()) + " differ: " + listed + ")");
    }
  }
  std::vector<ScoredRecord> out = members[0];
  const bool all_fr = std::all_of(members.begin(), members.end(), [](const auto& mem) {
    return std::all_of(mem.begin(), mem.end(), [](const ScoredRecord& r) { return r.p_fr.has_value(); });
  });
  std::vector<double> pd(out.size(), 0.0);
  std::vector<double> pf(out.size(), 0.0);
  for (const auto& mem : members) {
    for (const auto& r : mem) {
      const auto i = first.at(r.id);
      pd[i] += r.p_domain;
      if (all_fr) pf[i] += *r.p_fr;
    }
  }
  const auto k = static_cast<double>(members.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].p_domain = quantize_sig9(pd[i] / k);
    out[i].p_fr = all_fr ? std::optional<double>(quantize_sig9(pf[i] / k)) : std::nullopt;
  }
  return out;
}

Json scored_record_to_json(const ScoredRecord& r) {
  Json j{{"id", r.id}, {"routed_domain", r.routed_domain}, {"p_domain", r.p_domain}};
  if (r.p_fr) j["p_fr"] = *r.p_fr;
  return j;
}

ScoredRecord scored_record_from_json(const Json& j, const std::string& path, std::size_t line) {
  require_known_fields(j, {"id", "routed_domain", "p_domain", "p_fr"}, path, line);
  ScoredRecord r;
  r.id = j.at("id").get<std::string>();
  r.routed_domain = j.at("routed_domain").get<corpus::DomainId>();
  r.p_domain = j.at("p_domain").get<double>();
  if (j.contains("p_fr")) r.p_fr = j.at("p_fr").get<double>();
  return r;
}

void write_scores(const std::filesystem::path& path, const ScoreFileHeader& header,
                  const std::vector<ScoredRecord>& records) {
  std::string out;
  OrderedJson h;
  h["header"] = true;
  h["model_digest"] = header.model_digest;
  h["head"] = header.head;
  h["threshold"] = header.threshold ? OrderedJson(*header.threshold) : OrderedJson(nullptr);
  h["target_domain"] = header.target_domain;
  h["count"] = records.size();
  out += h.dump() + "\n";
  for (const auto& r : records) out += scored_record_to_json(r).dump() + "\n";
  write_text_file(path, out);
}

std::pair<ScoreFileHeader, std::vector<ScoredRecord>> read_scores(const std::filesystem::path& path) {
  ScoreFileHeader header;
  std::vector<ScoredRecord> records;
  bool seen_header = false;
  read_jsonl(path, [&](const Json& j, std::size_t line) {
    if (!seen_header) {
      if (!j.contains("header")) throw ParseError(path.string(), line, "missing header object");
      require_known_fields(j, {"header", "model_digest", "head", "threshold", "target_domain", "count"},
                           path.string(), line);
      header.model_digest = j.at("model_digest").get<std::string>();
      header.head = j.at("head").get<std::string>();
      if (!j.at("threshold").is_null()) header.threshold = j.at("threshold").get<double>();
      header.target_domain = j.at("target_domain").get<corpus::DomainId>();
      seen_header = true;
      return;
    }
    records.push_back(scored_record_from_json(j, path.string(), line));
  });
  if (!seen_header) throw ParseError(path.string(), 1, "empty score file");
  return {header, records};
}

}  // namespace frforge::detector
