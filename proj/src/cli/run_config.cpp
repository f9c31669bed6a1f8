#include "frforge/cli/run_config.hpp"

#include <cstdlib>
#include <functional>
#include <map>

#include "frforge/common/error.hpp"

namespace frforge::cli {
namespace {

using Handler = std::function<void(const Json&)>;

void dispatch(const Json& j, const std::string& where, const std::map<std::string, Handler>& handlers) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown key '" + where + "." + key + "'");
    try {
      it->second(value);
    } catch (const Json::exception& e) {
      throw ConfigError("invalid value for '" + where + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
Handler set(T& out) {
  return [&out](const Json& v) { out = v.get<T>(); };
}

void read_corpus(const Json& j, CorpusSection& c) {
  dispatch(j, "corpus",
           {{"spec", set(c.spec_path)},
            {"size", set(c.size)},
            {"traffic_size", set(c.traffic_size)},
            {"pool_size", set(c.pool_size)},
            {"heldout_size", set(c.heldout_size)}});
}

void read_pipeline(const Json& j, PipelineSection& p) {
  dispatch(j, "pipeline",
           {{"target", set(p.target)},
            {"n", set(p.n)},
            {"noise_sigma", set(p.noise_sigma)},
            {"false_reject_rate", set(p.false_reject_rate)},
            {"production",
             [&](const Json& v) {
               dispatch(v, "pipeline.production",
                        {{"epochs", set(p.production.epochs)},
                         {"learning_rate", set(p.production.learning_rate)},
                         {"l2", set(p.production.l2)},
                         {"balance_classes", set(p.production.balance_classes)}});
             }},
            {"dataset", [&](const Json& v) {
               dispatch(v, "pipeline.dataset",
                        {{"ratio", set(p.dataset.ratio)},
                         {"holdout", set(p.dataset.holdout)},
                         {"accepted_mix", set(p.dataset.accepted_mix)},
                         {"fr_cap", set(p.dataset.fr_cap)}});
             }}});
}

void read_model(const Json& j, ModelSection& m) {
  dispatch(j, "model",
           {{"transformer", [&](const Json& v) { m.base.transformer = models::transformer_config_from_json(v); }},
            {"lstm", [&](const Json& v) { m.base.lstm = models::lstm_config_from_json(v); }},
            {"fusion", [&](const Json& v) { m.base.fusion = models::fusion_config_from_json(v); }},
            {"trunk_layers", set(m.base.trunk_layers)},
            {"pretrained", set(m.pretrained)},
            {"kinds",
             [&](const Json& v) {
               m.kinds.clear();
               for (const auto& k : v) m.kinds.push_back(models::model_kind_from_string(k.get<std::string>()));
             }},
            {"pretrain", [&](const Json& v) {
               dispatch(v, "model.pretrain",
                        {{"epochs", set(m.pretrain.epochs)},
                         {"batch_size", set(m.pretrain.batch_size)},
                         {"base_lr", set(m.pretrain.base_lr)},
                         {"warmup_fraction", set(m.pretrain.warmup_fraction)},
                         {"mask_probability", set(m.pretrain.mask_probability)},
                         {"max_sequences", set(m.pretrain.max_sequences)}});
             }}});
}

void read_train(const Json& j, TrainSection& t) {
  Json rest = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "seeds") {
      t.seeds = value.get<std::vector<std::uint64_t>>();
    } else if (key == "bilstm_base_lr") {
      t.bilstm_base_lr = value.get<double>();
    } else {
      rest[key] = value;
    }
  }
  if (rest.contains("seed")) throw ConfigError("unknown key 'train.seed' (use train.seeds)");
  t.config = detector::train_config_from_json(rest);
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  dispatch(j, "config",
           {{"schema_version", set(c.schema_version)},
            {"seed", set(c.seed)},
            {"corpus", [&](const Json& v) { read_corpus(v, c.corpus); }},
            {"pipeline", [&](const Json& v) { read_pipeline(v, c.pipeline); }},
            {"model", [&](const Json& v) { read_model(v, c.model); }},
            {"train", [&](const Json& v) { read_train(v, c.train); }},
            {"detect",
             [&](const Json& v) {
               dispatch(v, "detect",
                        {{"threshold", set(c.detect.threshold)},
                         {"top_k", set(c.detect.top_k)},
                         {"head", [&](const Json& h) { c.detect.head = models::head_from_string(h.get<std::string>()); }}});
             }},
            {"eval", [&](const Json& v) { dispatch(v, "eval", {{"threshold", set(c.eval.threshold)}, {"split", set(c.eval.split)}}); }},
            {"feedback", [&](const Json& v) {
               dispatch(v, "feedback",
                        {{"oracle_error_rate", set(c.feedback.oracle_error_rate)},
                         {"min_confirmed", set(c.feedback.min_confirmed)},
                         {"warm_start", set(c.feedback.warm_start)},
                         {"retrain_epochs", set(c.feedback.retrain_epochs)},
                         {"retrain_learning_rate", set(c.feedback.retrain_learning_rate)}});
             }}});
  validate(c);
  return c;
}

OrderedJson run_config_to_json(const RunConfig& c) {
  OrderedJson j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["corpus"] = {{"spec", c.corpus.spec_path},
                 {"size", c.corpus.size},
                 {"traffic_size", c.corpus.traffic_size},
                 {"pool_size", c.corpus.pool_size},
                 {"heldout_size", c.corpus.heldout_size}};
  const auto& p = c.pipeline;
  j["pipeline"] = {{"target", p.target},
                   {"n", p.n},
                   {"noise_sigma", p.noise_sigma},
                   {"false_reject_rate", p.false_reject_rate},
                   {"production",
                    {{"epochs", p.production.epochs},
                     {"learning_rate", p.production.learning_rate},
                     {"l2", p.production.l2},
                     {"balance_classes", p.production.balance_classes}}},
                   {"dataset",
                    {{"ratio", p.dataset.ratio},
                     {"holdout", p.dataset.holdout},
                     {"accepted_mix", p.dataset.accepted_mix},
                     {"fr_cap", p.dataset.fr_cap}}}};
  OrderedJson kinds = OrderedJson::array();
  for (auto k : c.model.kinds) kinds.push_back(std::string(models::to_string(k)));
  j["model"] = {{"transformer", OrderedJson::parse(models::to_json(c.model.base.transformer).dump())},
                {"lstm", OrderedJson::parse(models::to_json(c.model.base.lstm).dump())},
                {"fusion", OrderedJson::parse(models::to_json(c.model.base.fusion).dump())},
                {"trunk_layers", c.model.base.trunk_layers},
                {"pretrained", c.model.pretrained},
                {"kinds", kinds},
                {"pretrain",
                 {{"epochs", c.model.pretrain.epochs},
                  {"batch_size", c.model.pretrain.batch_size},
                  {"base_lr", c.model.pretrain.base_lr},
                  {"warmup_fraction", c.model.pretrain.warmup_fraction},
                  {"mask_probability", c.model.pretrain.mask_probability},
                  {"max_sequences", c.model.pretrain.max_sequences}}}};
  auto train = OrderedJson::parse(detector::to_json(c.train.config).dump());
  train.erase("seed");
  train["bilstm_base_lr"] = c.train.bilstm_base_lr;
  train["seeds"] = c.train.seeds;
  j["train"] = train;
  j["detect"] = {{"threshold", c.detect.threshold},
                 {"head", std::string(models::to_string(c.detect.head))},
                 {"top_k", c.detect.top_k}};
  j["eval"] = {{"threshold", c.eval.threshold}, {"split", c.eval.split}};
  j["feedback"] = {{"oracle_error_rate", c.feedback.oracle_error_rate},
                   {"min_confirmed", c.feedback.min_confirmed},
                   {"warm_start", c.feedback.warm_start},
                   {"retrain_epochs", c.feedback.retrain_epochs},
                   {"retrain_learning_rate", c.feedback.retrain_learning_rate}};
  return j;
}

void validate(const RunConfig& c) {
  if (c.schema_version != 1) throw ConfigError("unsupported config schema_version " + std::to_string(c.schema_version));
  if (c.corpus.size == 0) throw ConfigError("corpus.size must be positive");
  if (c.pipeline.n < 1) throw ConfigError("pipeline.n must be >= 1");
  if (c.pipeline.noise_sigma < 0) throw ConfigError("pipeline.noise_sigma must be >= 0");
  if (!(c.pipeline.false_reject_rate > 0 && c.pipeline.false_reject_rate < 1)) {
    throw ConfigError("pipeline.false_reject_rate must be in (0,1)");
  }
  if (c.pipeline.dataset.ratio < 1) throw ConfigError("pipeline.dataset.ratio must be >= 1");
  if (!(c.pipeline.dataset.holdout > 0 && c.pipeline.dataset.holdout < 1)) {
    throw ConfigError("pipeline.dataset.holdout must be in (0,1)");
  }
  if (c.model.kinds.empty()) throw ConfigError("model.kinds must not be empty");
  if (c.train.seeds.empty()) throw ConfigError("train.seeds must not be empty");
  detector::validate(c.train.config);
  for (double t : {c.detect.threshold, c.eval.threshold}) {
    if (!(t >= 0 && t <= 1)) throw ConfigError("thresholds must be in [0,1]");
  }
  if (c.eval.split != "pool" && c.eval.split != "valid") throw ConfigError("eval.split must be \"pool\" or \"valid\"");
  if (!(c.feedback.oracle_error_rate >= 0 && c.feedback.oracle_error_rate < 0.5)) {
    throw ConfigError("feedback.oracle_error_rate must be in [0, 0.5)");
  }
  if (c.feedback.retrain_learning_rate < 0) throw ConfigError("feedback.retrain_learning_rate must be >= 0");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  if (!path.empty()) {
    Json j;
    try {
      j = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    c = run_config_from_json(j);
  }
  if (const char* env = std::getenv("FRFORGE_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("FRFORGE_SEED must be an unsigned integer");
    c.seed = v;
  }
  return c;
}

}  // namespace frforge::cli
