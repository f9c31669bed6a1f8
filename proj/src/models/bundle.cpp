#include "frforge/models/bundle.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "frforge/common/error.hpp"
#include "frforge/common/rng.hpp"
#include "frforge/numeric/checkpoint.hpp"
#include "frforge/numeric/optim.hpp"

namespace frforge::models {

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle, std::int64_t step) {
  numeric::save_checkpoint(dir, bundle.params, step);
  OrderedJson model;
  model["schema_version"] = 1;
  model["model"] = to_json(bundle.config);
  model["nonlinearity"] = "gelu_erf";
  model["vocab_size"] = bundle.vocab.size();
  model["vocab_digest"] = hex_digest(bundle.vocab.digest());
  model["parameter_count"] = bundle.params.parameter_count();
  model["provenance"] = bundle.provenance;
  write_text_file(dir / "model.json", model.dump(2) + "\n");
  bundle.vocab.save(dir / "vocab.txt");
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  const auto path = dir / "model.json";
  if (!std::filesystem::exists(path)) throw ConfigError("no model bundle at " + dir.string());
  Json model;
  try {
    model = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  ModelBundle b;
  try {
    if (model.at("schema_version").get<int>() != 1) throw ConfigError("unsupported model bundle schema");
    b.config = model_config_from_json(model.at("model"));
    if (model.contains("provenance")) b.provenance = model.at("provenance");
  } catch (const Json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  b.vocab = corpus::Vocabulary::load(dir / "vocab.txt");
  b.params = numeric::load_checkpoint(dir).params;
  const auto expected = init_params(b.config, 0);
  for (const auto& [name, t] : expected) {
    if (!b.params.contains(name) || b.params.at(name).shape != t.shape) {
      throw ConfigError("bundle at " + dir.string() + " is missing or misshapes parameter '" + name + "'");
    }
  }
  return b;
}

ModelInput make_input(const corpus::Vocabulary& vocab, const std::vector<std::string>& text,
                      const nlu::NBestList& nbest) {
  return {vocab.encode(text), nbest};
}

std::string_view to_string(Head head) { return head == Head::domain ? "domain" : "fr"; }

Head head_from_string(std::string_view name) {
  if (name == "domain") return Head::domain;
  if (name == "fr") return Head::fr;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected domain or fr)");
}

std::vector<HeadProbabilities> predict(const ModelConfig& config, const ParamStore& params,
                                       std::span<const ModelInput> inputs, std::size_t batch_size) {
  if (batch_size == 0) throw ContractError("predict batch size must be positive");
  // The encoder runs once per distinct token sequence.
  std::map<std::vector<int>, Eigen::Index> row_of;
  std::vector<std::vector<int>> unique;
  std::vector<Eigen::Index> rows;
  rows.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto [it, fresh] = row_of.emplace(in.tokens, static_cast<Eigen::Index>(unique.size()));
    if (fresh) unique.push_back(in.tokens);
    rows.push_back(it->second);
  }
  numeric::Mat<float> encoded;
  for (std::size_t start = 0; start < unique.size(); start += batch_size) {
    const auto n = std::min(batch_size, unique.size() - start);
    Tape<float> tape(&params, false);
    const auto& h = tape.value(encode(tape, config, std::span<const std::vector<int>>(unique).subspan(start, n)));
    if (encoded.size() == 0) encoded.resize(static_cast<Eigen::Index>(unique.size()), h.cols());
    encoded.middleRows(static_cast<Eigen::Index>(start), h.rows()) = h;
  }
  std::vector<HeadProbabilities> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
    const auto batch = inputs.subspan(start, std::min(batch_size, inputs.size() - start));
    numeric::Mat<float> h(static_cast<Eigen::Index>(batch.size()), encoded.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = encoded.row(rows[start + i]);
    Tape<float> tape(&params, false);
    const auto logits = forward_from_encoding(tape, config, tape.constant(std::move(h)), batch);
    const auto& ld = tape.value(logits.domain);
    for (Eigen::Index i = 0; i < ld.rows(); ++i) {
      HeadProbabilities p;
      p.p_domain = numeric::binary_class_probs<double>(ld(i, 0)).second;
      if (logits.fr) p.p_fr = numeric::binary_class_probs<double>(tape.value(*logits.fr)(i, 0)).second;
      out.push_back(p);
    }
  }
  return out;
}

double head_probability(const HeadProbabilities& probs, Head head) {
  if (head == Head::domain) return probs.p_domain;
  if (!probs.p_fr) throw ContractError("fr head requested from a single-task model");
  return *probs.p_fr;
}

PretrainResult pretrain_encoder(const TransformerConfig& config, const std::vector<std::vector<int>>& sequences,
                                const PretrainConfig& options) {
  if (options.epochs < 1 || options.batch_size < 1) throw ConfigError("pretraining epochs and batch size must be >= 1");
  if (options.mask_probability <= 0 || options.mask_probability >= 1) {
    throw ConfigError("mask probability must be in (0,1)");
  }
  std::vector<std::vector<int>> data;
  for (const auto& s : sequences) {
    if (s.empty()) continue;
    data.emplace_back(s.begin(), s.begin() + std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(s.size()),
                                                                      config.max_length - 1));
  }
  if (data.empty()) throw EmptyDatasetError("no non-empty sequences to pretrain on");
  if (options.max_sequences < 0) throw ConfigError("pretraining max_sequences must be >= 0");
  const auto cap = static_cast<std::size_t>(options.max_sequences);
  if (cap > 0 && data.size() > cap) {
    std::vector<std::size_t> keep(data.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    Rng pick(derive_seed(options.seed, "pretrain-subsample"));
    pick.shuffle(keep.begin(), keep.end());
    keep.resize(cap);
    std::sort(keep.begin(), keep.end());
    std::vector<std::vector<int>> subset;
    subset.reserve(cap);
    for (auto i : keep) subset.push_back(std::move(data[i]));
    data = std::move(subset);
  }

  ParamStore params = init_pretraining_params(config, derive_seed(options.seed, "pretrain-init"));
  const auto bs = static_cast<std::size_t>(options.batch_size);
  const auto per_epoch = static_cast<std::int64_t>((data.size() + bs - 1) / bs);
  numeric::ScheduleConfig schedule;
  schedule.base_lr = options.base_lr;
  schedule.warmup_fraction = options.warmup_fraction;
  schedule.total_steps = per_epoch * options.epochs;
  numeric::validate(schedule);
  numeric::AdamState adam;
  PretrainResult result;
  Rng mask_rng(derive_seed(options.seed, "pretrain-mask"));
  std::vector<std::size_t> order(data.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(derive_seed(options.seed, "pretrain-shuffle"), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto end = std::min(order.size(), start + bs);
      std::vector<std::vector<int>> corrupted;
      std::vector<std::vector<int>> positions;
      std::vector<int> targets;
      for (std::size_t i = start; i < end; ++i) {
        auto seq = data[order[i]];
        std::vector<int> picked;
        for (std::size_t p = 0; p < seq.size(); ++p) {
          if (mask_rng.bernoulli(options.mask_probability)) picked.push_back(static_cast<int>(p));
        }
        if (picked.empty()) picked.push_back(static_cast<int>(mask_rng.below(seq.size())));
        std::vector<int> rows;
        for (int p : picked) {
          targets.push_back(seq[static_cast<std::size_t>(p)]);
          rows.push_back(p + 1);  // after [CLS]
          const double r = mask_rng.uniform();
          if (r < 0.8) {
            seq[static_cast<std::size_t>(p)] = corpus::kMaskId;
          } else if (r < 0.9) {
            seq[static_cast<std::size_t>(p)] =
                corpus::kNumReserved +
                static_cast<int>(mask_rng.below(static_cast<std::uint64_t>(config.vocab_size - corpus::kNumReserved)));
          }
        }
        corrupted.push_back(std::move(seq));
        positions.push_back(std::move(rows));
      }
      ++step;
      Tape<float> tape(&params, true, derive_seed(derive_seed(options.seed, "pretrain-dropout"),
                                                  static_cast<std::uint64_t>(step)));
      const Var loss = mlm_loss(tape, config, std::span<const std::vector<int>>(corrupted),
                                std::span<const std::vector<int>>(positions), std::span<const int>(targets));
      tape.backward(loss);
      epoch_loss += tape.value(loss)(0, 0) * static_cast<double>(end - start);
      numeric::adam_step(params, tape.param_grads(), adam, numeric::lr_at_step(step, schedule));
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
    spdlog::info("pretrain epoch {} masked-token loss {:.4f}", epoch + 1, result.epoch_loss.back());
  }
  result.steps = step;
  result.encoder.set_seed(params.seed());
  for (const auto& [name, t] : params) {
    if (name.starts_with("encoder.")) result.encoder.set(name, t);
  }
  return result;
}

void load_encoder_weights(ParamStore& params, const ParamStore& encoder) {
  for (const auto& [name, t] : encoder) {
    if (!name.starts_with("encoder.")) continue;
    if (!params.contains(name) || params.at(name).shape != t.shape) {
      throw ContractError("pretrained tensor '" + name + "' does not match the model configuration");
    }
    params.at(name) = t;
  }
}

}  // namespace frforge::models
