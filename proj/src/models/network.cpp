#include "frforge/models/network.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

namespace frforge::models {
namespace {

using Shape = std::vector<std::size_t>;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

void add_dense(ParamStore& p, const std::string& prefix, int in, int out) {
  p.add_uniform(prefix + ".weight", {sz(in), sz(out)}, std::sqrt(6.0 / (in + out)));
  p.add_constant(prefix + ".bias", {1, sz(out)}, 0.0f);
}

void add_norm(ParamStore& p, const std::string& prefix, int width) {
  p.add_constant(prefix + ".gain", {1, sz(width)}, 1.0f);
  p.add_constant(prefix + ".bias", {1, sz(width)}, 0.0f);
}

void add_encoder(ParamStore& p, const TransformerConfig& c) {
  const int h = c.hidden;
  p.add_normal("encoder.token_embedding", {sz(c.vocab_size), sz(h)}, 0.02);
  p.add_normal("encoder.position_embedding", {sz(c.max_length), sz(h)}, 0.02);
  add_norm(p, "encoder.embedding_norm", h);
  for (int l = 0; l < c.layers; ++l) {
    for (const char* part : {"attention.query", "attention.key", "attention.value", "attention.output"}) {
      add_dense(p, detail::layer_name(l, part), h, h);
    }
    add_norm(p, detail::layer_name(l, "attention_norm"), h);
    add_dense(p, detail::layer_name(l, "feed_forward.inner"), h, h * c.ff_multiple);
    add_dense(p, detail::layer_name(l, "feed_forward.outer"), h * c.ff_multiple, h);
    add_norm(p, detail::layer_name(l, "output_norm"), h);
  }
}

void add_lstm_direction(ParamStore& p, const std::string& prefix, const LstmConfig& c) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(c.hidden));
  p.add_uniform(prefix + ".input_weight", {sz(c.embedding_dim), sz(4 * c.hidden)}, limit);
  p.add_uniform(prefix + ".hidden_weight", {sz(c.hidden), sz(4 * c.hidden)}, limit);
  auto& b = p.add_constant(prefix + ".bias", {1, sz(4 * c.hidden)}, 0.0f);
  for (int i = c.hidden; i < 2 * c.hidden; ++i) b.values[sz(i)] = 1.0f;  // forget gate
}

}  // namespace

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ParamStore p(seed);
  if (uses_transformer(config.kind)) {
    add_encoder(p, config.transformer);
    if (uses_nbest(config.kind)) {
      const auto& f = config.fusion;
      // Unit scale, matching the layer-normed encoder features they sit beside.
      p.add_normal("nbest.domain_embedding", {sz(f.num_domains + 1), sz(f.d)}, 1.0);
      p.add_uniform("nbest.score_projection", {1, sz(f.d)}, 1.0);
    }
    int in = config.trunk_input_dim();
    for (int k = 0; k < config.trunk_layers; ++k) {
      add_dense(p, "trunk.layer" + std::to_string(k), in, config.fusion.hidden);
      in = config.fusion.hidden;
    }
  } else {
    const auto& c = config.lstm;
    p.add_normal("lstm.embedding", {sz(c.vocab_size), sz(c.embedding_dim)}, 0.1);
    add_lstm_direction(p, "lstm.forward", c);
    add_lstm_direction(p, "lstm.backward", c);
  }
  add_dense(p, "head.domain", config.trunk_dim(), 1);
  if (is_multitask(config.kind)) add_dense(p, "head.fr", config.trunk_dim(), 1);
  return p;
}

ParamStore init_pretraining_params(const TransformerConfig& config, std::uint64_t seed) {
  ParamStore p(seed);
  add_encoder(p, config);
  add_dense(p, "mlm.output", config.hidden, config.vocab_size);
  return p;
}

std::vector<int> transformer_ids(std::span<const int> tokens, int max_length, ForwardProbe* probe) {
  std::vector<int> row;
  row.reserve(std::min(tokens.size() + 1, sz(max_length)));
  row.push_back(corpus::kClsId);
  for (int id : tokens) {
    if (static_cast<int>(row.size()) == max_length) {
      spdlog::warn("input of {} tokens truncated to {} positions", tokens.size(), max_length);
      if (probe != nullptr) ++probe->truncated;
      break;
    }
    row.push_back(id);
  }
  return row;
}

}  // namespace frforge::models
