#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frforge/corpus/vocab.hpp"
#include "frforge/models/config.hpp"
#include "frforge/nlu/types.hpp"
#include "frforge/numeric/ops.hpp"

namespace frforge::models {

using numeric::Mat;
using numeric::ParamStore;
using numeric::Segment;
using numeric::Tape;
using numeric::Var;

// One model input: token ids (no [CLS]) and the reranker's n-best list.
struct ModelInput {
  std::vector<int> tokens;
  nlu::NBestList nbest;
};

struct HeadLogits {
  Var domain;                 // batch x 1
  std::optional<Var> fr;      // batch x 1, multitask only
};

// Optional instrumentation filled during a forward pass.
struct ForwardProbe {
  // Per layer, per (example, head): row-stochastic attention matrices.
  std::vector<std::vector<Mat<double>>> attention;
  std::size_t truncated = 0;
};

// Fresh parameters for `config`; names are stable across kinds.
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

// Encoder-only parameters (names prefixed "encoder.") plus the masked-LM
// output layer ("mlm.").
ParamStore init_pretraining_params(const TransformerConfig& config, std::uint64_t seed);

// [CLS] + ids, truncated to max_length. Counts truncations in `probe`.
std::vector<int> transformer_ids(std::span<const int> tokens, int max_length, ForwardProbe* probe);

namespace detail {

inline std::string layer_name(int l, const char* rest) { return "encoder.layer" + std::to_string(l) + "." + rest; }

template <typename T>
Var linear_named(Tape<T>& t, Var x, const std::string& prefix) {
  return numeric::ops::linear(t, x, t.param(prefix + ".weight"), t.param(prefix + ".bias"));
}

template <typename T>
Var norm_named(Tape<T>& t, Var x, const std::string& prefix) {
  return numeric::ops::layer_norm(t, x, t.param(prefix + ".gain"), t.param(prefix + ".bias"));
}

}  // namespace detail

// Bi-LSTM over each sequence: [forward final state | backward final state].
template <typename T>
Var encode_bilstm(Tape<T>& t, const LstmConfig&, std::span<const std::vector<int>> batch) {
  namespace op = numeric::ops;
  std::vector<int> ids;
  std::vector<Segment> segs;
  for (const auto& seq : batch) {
    segs.push_back({ids.size(), std::max<std::size_t>(seq.size(), 1)});
    if (seq.empty()) ids.push_back(corpus::kPadId);
    ids.insert(ids.end(), seq.begin(), seq.end());
  }
  const Var x = op::gather_rows(t, t.param("lstm.embedding"), std::span<const int>(ids));
  const Var fwd = op::lstm_final_state(t, x, std::span<const Segment>(segs), t.param("lstm.forward.input_weight"),
                                       t.param("lstm.forward.hidden_weight"), t.param("lstm.forward.bias"), false);
  const Var bwd = op::lstm_final_state(t, x, std::span<const Segment>(segs), t.param("lstm.backward.input_weight"),
                                       t.param("lstm.backward.hidden_weight"), t.param("lstm.backward.bias"), true);
  return op::concat_cols(t, fwd, bwd);
}

// Packed transformer encoder; returns every token state (tokens x H) and the
// segment layout, so callers can read [CLS] rows or masked positions.
template <typename T>
Var encode_transformer_tokens(Tape<T>& t, const TransformerConfig& cfg, std::span<const std::vector<int>> batch,
                              std::vector<Segment>& segs, ForwardProbe* probe = nullptr) {
  namespace op = numeric::ops;
  std::vector<int> ids;
  std::vector<int> positions;
  segs.clear();
  for (const auto& seq : batch) {
    const auto row = transformer_ids(seq, cfg.max_length, probe);
    segs.push_back({ids.size(), row.size()});
    for (std::size_t i = 0; i < row.size(); ++i) {
      ids.push_back(row[i]);
      positions.push_back(static_cast<int>(i));
    }
  }
  Var x = op::add(t, op::gather_rows(t, t.param("encoder.token_embedding"), std::span<const int>(ids)),
                  op::gather_rows(t, t.param("encoder.position_embedding"), std::span<const int>(positions)));
  x = op::dropout(t, detail::norm_named(t, x, "encoder.embedding_norm"), cfg.dropout);
  for (int l = 0; l < cfg.layers; ++l) {
    const Var q = detail::linear_named(t, x, detail::layer_name(l, "attention.query"));
    const Var k = detail::linear_named(t, x, detail::layer_name(l, "attention.key"));
    const Var v = detail::linear_named(t, x, detail::layer_name(l, "attention.value"));
    std::vector<Mat<T>> probs;
    Var a = op::self_attention(t, q, k, v, std::span<const Segment>(segs), cfg.heads,
                               probe != nullptr ? &probs : nullptr);
    if (probe != nullptr) {
      auto& layer = probe->attention.emplace_back();
      for (auto& p : probs) layer.push_back(p.template cast<double>());
    }
    a = op::dropout(t, detail::linear_named(t, a, detail::layer_name(l, "attention.output")), cfg.dropout);
    x = detail::norm_named(t, op::add(t, x, a), detail::layer_name(l, "attention_norm"));
    Var f = op::gelu(t, detail::linear_named(t, x, detail::layer_name(l, "feed_forward.inner")));
    f = op::dropout(t, detail::linear_named(t, f, detail::layer_name(l, "feed_forward.outer")), cfg.dropout);
    x = detail::norm_named(t, op::add(t, x, f), detail::layer_name(l, "output_norm"));
  }
  return x;
}

// [CLS] representation per sequence (batch x H).
template <typename T>
Var encode_transformer(Tape<T>& t, const TransformerConfig& cfg, std::span<const std::vector<int>> batch,
                       ForwardProbe* probe = nullptr) {
  std::vector<Segment> segs;
  const Var x = encode_transformer_tokens(t, cfg, batch, segs, probe);
  std::vector<int> cls;
  cls.reserve(segs.size());
  for (const auto& s : segs) cls.push_back(static_cast<int>(s.offset));
  return numeric::ops::gather_rows(t, x, std::span<const int>(cls));
}

// Fixed-size n-best vector (batch x d*N). Slot i holds the embedding of the
// i-th hypothesis; missing slots hold the null hypothesis row with score 0.
template <typename T>
Var embed_nbest(Tape<T>& t, const FusionConfig& cfg, std::span<const nlu::NBestList> batch) {
  namespace op = numeric::ops;
  const auto b = static_cast<Eigen::Index>(batch.size());
  const auto n = static_cast<std::size_t>(cfg.n);
  std::vector<int> rows;
  rows.reserve(batch.size() * n);
  Mat<T> scores = Mat<T>::Zero(b * cfg.n, 1);
  Mat<T> pad_mask = Mat<T>::Zero(b * cfg.n, cfg.d);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto& hyps = batch[e].hypotheses;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(e * n + i);
      if (i < hyps.size()) {
        const int dom = hyps[i].domain_id;
        if (dom < 0 || dom >= cfg.num_domains) {
          throw ContractError("hypothesis domain id " + std::to_string(dom) + " outside the embedding table (" +
                              std::to_string(cfg.num_domains) + " domains)");
        }
        rows.push_back(dom);
        scores(r, 0) = static_cast<T>(hyps[i].score);
      } else {
        rows.push_back(cfg.null_hypothesis_id());
        pad_mask.row(r).setOnes();
      }
    }
  }
  Var slot = op::gather_rows(t, t.param("nbest.domain_embedding"), std::span<const int>(rows));
  if (cfg.mode == HypothesisEmbedding::score_only) slot = op::mul(t, slot, t.constant(std::move(pad_mask)));
  if (cfg.mode != HypothesisEmbedding::table_only) {
    slot = op::add(t, slot, op::matmul(t, t.constant(std::move(scores)), t.param("nbest.score_projection")));
  }
  return op::reshape(t, slot, b, static_cast<Eigen::Index>(cfg.d) * cfg.n);
}

// Concatenates the encoder output with the n-best vector after checking that
// the widths match the configuration.
template <typename T>
Var fuse(Tape<T>& t, const ModelConfig& cfg, Var encoded, Var nbest_vec) {
  const auto enc_cols = t.value(encoded).cols();
  const auto nb_cols = t.value(nbest_vec).cols();
  if (enc_cols != cfg.encoder_dim() || nb_cols != cfg.fusion.nbest_dim()) {
    throw ContractError("fusion expects encoder width " + std::to_string(cfg.encoder_dim()) + " and n-best width " +
                        std::to_string(cfg.fusion.nbest_dim()) + ", got " + std::to_string(enc_cols) + " and " +
                        std::to_string(nb_cols));
  }
  return numeric::ops::concat_cols(t, encoded, nbest_vec);
}

// Encoder output per utterance: the bi-LSTM state pair or the [CLS] row.
template <typename T>
Var encode(Tape<T>& t, const ModelConfig& cfg, std::span<const std::vector<int>> tokens,
           ForwardProbe* probe = nullptr) {
  if (tokens.empty()) throw ContractError("forward called with an empty batch");
  if (!uses_transformer(cfg.kind)) return encode_bilstm(t, cfg.lstm, tokens);
  return encode_transformer(t, cfg.transformer, tokens, probe);
}

// Fusion, trunk and heads on top of an encoding of `batch`.
template <typename T>
HeadLogits forward_from_encoding(Tape<T>& t, const ModelConfig& cfg, Var h, std::span<const ModelInput> batch) {
  namespace op = numeric::ops;
  if (uses_transformer(cfg.kind)) {
    if (uses_nbest(cfg.kind)) {
      std::vector<nlu::NBestList> lists;
      lists.reserve(batch.size());
      for (const auto& in : batch) lists.push_back(in.nbest);
      h = fuse(t, cfg, h, embed_nbest(t, cfg.fusion, std::span<const nlu::NBestList>(lists)));
    }
    for (int k = 0; k < cfg.trunk_layers; ++k) {
      h = op::gelu(t, detail::linear_named(t, h, "trunk.layer" + std::to_string(k)));
      h = op::dropout(t, h, cfg.transformer.dropout);
    }
  }
  HeadLogits out;
  out.domain = detail::linear_named(t, h, "head.domain");
  if (is_multitask(cfg.kind)) out.fr = detail::linear_named(t, h, "head.fr");
  return out;
}

// Full forward pass to head logits.
template <typename T>
HeadLogits forward(Tape<T>& t, const ModelConfig& cfg, std::span<const ModelInput> batch,
                   ForwardProbe* probe = nullptr) {
  if (batch.empty()) throw ContractError("forward called with an empty batch");
  std::vector<std::vector<int>> tokens;
  tokens.reserve(batch.size());
  for (const auto& in : batch) tokens.push_back(in.tokens);
  const Var h = encode(t, cfg, std::span<const std::vector<int>>(tokens), probe);
  return forward_from_encoding(t, cfg, h, batch);
}

// Weighted sum of the head losses. `fr_labels` is ignored for single-task kinds.
template <typename T>
Var multitask_loss(Tape<T>& t, const HeadLogits& logits, std::span<const T> domain_labels,
                   std::span<const T> fr_labels, double w_domain, double w_fr) {
  namespace op = numeric::ops;
  Var loss = op::scale(t, op::bce_with_logits(t, logits.domain, domain_labels), static_cast<T>(w_domain));
  if (logits.fr) {
    loss = op::add(t, loss, op::scale(t, op::bce_with_logits(t, *logits.fr, fr_labels), static_cast<T>(w_fr)));
  }
  return loss;
}

// Masked-LM loss over the positions listed per sequence (indices into the
// [CLS]-prefixed row) with their original token ids as targets.
template <typename T>
Var mlm_loss(Tape<T>& t, const TransformerConfig& cfg, std::span<const std::vector<int>> corrupted,
             std::span<const std::vector<int>> positions, std::span<const int> targets) {
  std::vector<Segment> segs;
  const Var x = encode_transformer_tokens(t, cfg, corrupted, segs);
  std::vector<int> rows;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    for (int p : positions[s]) rows.push_back(static_cast<int>(segs[s].offset) + p);
  }
  const Var picked = numeric::ops::gather_rows(t, x, std::span<const int>(rows));
  const Var logits = detail::linear_named(t, picked, "mlm.output");
  return numeric::ops::softmax_cross_entropy(t, logits, targets);
}

}  // namespace frforge::models
