#include "frforge/models/config.hpp"

#include "frforge/common/error.hpp"

namespace frforge::models {
namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::bilstm: return "bilstm";
    case ModelKind::transformer: return "transformer";
    case ModelKind::transformer_nbest_single: return "transformer_nbest_single";
    case ModelKind::transformer_nbest_multitask: return "transformer_nbest_multitask";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (auto k : {ModelKind::bilstm, ModelKind::transformer, ModelKind::transformer_nbest_single,
                 ModelKind::transformer_nbest_multitask}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(HypothesisEmbedding mode) {
  switch (mode) {
    case HypothesisEmbedding::table_and_score: return "table_and_score";
    case HypothesisEmbedding::table_only: return "table_only";
    case HypothesisEmbedding::score_only: return "score_only";
  }
  return "unknown";
}

HypothesisEmbedding hypothesis_embedding_from_string(std::string_view name) {
  for (auto m : {HypothesisEmbedding::table_and_score, HypothesisEmbedding::table_only,
                 HypothesisEmbedding::score_only}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown hypothesis embedding mode '" + std::string(name) + "'");
}

void validate(const ModelConfig& c) {
  if (uses_transformer(c.kind)) {
    const auto& t = c.transformer;
    if (t.vocab_size <= 4) throw ConfigError("transformer vocab_size too small");
    if (t.hidden < 1 || t.heads < 1 || t.hidden % t.heads != 0) {
      throw ConfigError("transformer hidden size must be divisible by heads");
    }
    if (t.layers < 1 || t.ff_multiple < 1) throw ConfigError("transformer layers and ff_multiple must be >= 1");
    if (t.max_length < 2) throw ConfigError("transformer max_length must be >= 2");
    if (t.dropout < 0 || t.dropout >= 1) throw ConfigError("dropout must be in [0,1)");
    if (c.trunk_layers < 1) throw ConfigError("trunk_layers must be >= 1");
    if (c.fusion.hidden < 1) throw ConfigError("fusion hidden must be >= 1");
  } else {
    if (c.lstm.vocab_size <= 4 || c.lstm.embedding_dim < 1 || c.lstm.hidden < 1) {
      throw ConfigError("invalid bi-LSTM configuration");
    }
  }
  if (uses_nbest(c.kind)) {
    if (c.fusion.n < 1 || c.fusion.d < 1) throw ConfigError("fusion n and d must be >= 1");
    if (c.fusion.num_domains < 1) throw ConfigError("fusion num_domains must be >= 1");
  }
}

Json to_json(const TransformerConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"hidden", c.hidden}, {"layers", c.layers}, {"heads", c.heads},
          {"ff_multiple", c.ff_multiple}, {"max_length", c.max_length}, {"dropout", c.dropout}};
}

Json to_json(const LstmConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"embedding_dim", c.embedding_dim}, {"hidden", c.hidden}};
}

Json to_json(const FusionConfig& c) {
  return {{"n", c.n}, {"d", c.d}, {"hidden", c.hidden}, {"num_domains", c.num_domains},
          {"mode", std::string(to_string(c.mode))}};
}

Json to_json(const ModelConfig& c) {
  return {{"kind", std::string(to_string(c.kind))}, {"transformer", to_json(c.transformer)},
          {"lstm", to_json(c.lstm)},                {"fusion", to_json(c.fusion)},
          {"trunk_layers", c.trunk_layers},         {"target_domain", c.target_domain}};
}

TransformerConfig transformer_config_from_json(const Json& j) {
  check_keys(j, {"vocab_size", "hidden", "layers", "heads", "ff_multiple", "max_length", "dropout"}, "transformer");
  TransformerConfig c;
  read(j, "vocab_size", c.vocab_size);
  read(j, "hidden", c.hidden);
  read(j, "layers", c.layers);
  read(j, "heads", c.heads);
  read(j, "ff_multiple", c.ff_multiple);
  read(j, "max_length", c.max_length);
  read(j, "dropout", c.dropout);
  return c;
}

LstmConfig lstm_config_from_json(const Json& j) {
  check_keys(j, {"vocab_size", "embedding_dim", "hidden"}, "lstm");
  LstmConfig c;
  read(j, "vocab_size", c.vocab_size);
  read(j, "embedding_dim", c.embedding_dim);
  read(j, "hidden", c.hidden);
  return c;
}

FusionConfig fusion_config_from_json(const Json& j) {
  check_keys(j, {"n", "d", "hidden", "num_domains", "mode"}, "fusion");
  FusionConfig c;
  read(j, "n", c.n);
  read(j, "d", c.d);
  read(j, "hidden", c.hidden);
  read(j, "num_domains", c.num_domains);
  if (j.contains("mode")) c.mode = hypothesis_embedding_from_string(j.at("mode").get<std::string>());
  return c;
}

ModelConfig model_config_from_json(const Json& j) {
  try {
    check_keys(j, {"kind", "transformer", "lstm", "fusion", "trunk_layers", "target_domain"}, "model");
    ModelConfig c;
    if (j.contains("kind")) c.kind = model_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("transformer")) c.transformer = transformer_config_from_json(j.at("transformer"));
    if (j.contains("lstm")) c.lstm = lstm_config_from_json(j.at("lstm"));
    if (j.contains("fusion")) c.fusion = fusion_config_from_json(j.at("fusion"));
    read(j, "trunk_layers", c.trunk_layers);
    read(j, "target_domain", c.target_domain);
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

}  // namespace frforge::models
