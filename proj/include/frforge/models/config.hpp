#pragma once

#include <string>
#include <string_view>

#include "frforge/common/io.hpp"

namespace frforge::models {

enum class ModelKind { bilstm, transformer, transformer_nbest_single, transformer_nbest_multitask };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

inline bool uses_transformer(ModelKind k) { return k != ModelKind::bilstm; }
inline bool uses_nbest(ModelKind k) {
  return k == ModelKind::transformer_nbest_single || k == ModelKind::transformer_nbest_multitask;
}
inline bool is_multitask(ModelKind k) { return k == ModelKind::transformer_nbest_multitask; }

struct TransformerConfig {
  int vocab_size = 0;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ff_multiple = 4;
  int max_length = 24;  // includes the [CLS] position
  double dropout = 0.1;
};

struct LstmConfig {
  int vocab_size = 0;
  int embedding_dim = 32;
  int hidden = 32;
};

// What each hypothesis embedding encodes.
enum class HypothesisEmbedding { table_and_score, table_only, score_only };

std::string_view to_string(HypothesisEmbedding mode);
HypothesisEmbedding hypothesis_embedding_from_string(std::string_view name);

struct FusionConfig {
  int n = 5;             // hypotheses consumed
  int d = 6;             // per-hypothesis embedding size
  int hidden = 64;       // trunk width
  int num_domains = 8;   // embedding table has num_domains + 1 rows
  HypothesisEmbedding mode = HypothesisEmbedding::table_and_score;

  int null_hypothesis_id() const { return num_domains; }
  int nbest_dim() const { return d * n; }
  int fused_input_dim(int encoder_dim) const { return encoder_dim + d * n; }
};

struct ModelConfig {
  ModelKind kind = ModelKind::transformer_nbest_multitask;
  TransformerConfig transformer;
  LstmConfig lstm;
  FusionConfig fusion;
  // Feed-forward layers between the encoder (plus n-best vector) and the heads.
  int trunk_layers = 1;
  int target_domain = 0;

  int encoder_dim() const { return uses_transformer(kind) ? transformer.hidden : 2 * lstm.hidden; }
  int trunk_input_dim() const { return uses_nbest(kind) ? fusion.fused_input_dim(encoder_dim()) : encoder_dim(); }
  // The bi-LSTM feeds its stateful output straight to the head.
  int trunk_dim() const { return uses_transformer(kind) ? fusion.hidden : encoder_dim(); }
};

// Throws ConfigError on violated invariants.
void validate(const ModelConfig& config);

Json to_json(const TransformerConfig& c);
Json to_json(const LstmConfig& c);
Json to_json(const FusionConfig& c);
Json to_json(const ModelConfig& c);
TransformerConfig transformer_config_from_json(const Json& j);
LstmConfig lstm_config_from_json(const Json& j);
FusionConfig fusion_config_from_json(const Json& j);
ModelConfig model_config_from_json(const Json& j);

}  // namespace frforge::models
