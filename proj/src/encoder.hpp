#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"
#include "text.hpp"
#include "util.hpp"

namespace ebert {

struct ModelConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 2;
  int ffn = 128;
  int max_len = 128;
  int vocab = 0;
  double dropout = 0.0;

  int head_dim() const { return hidden / heads; }
  void validate() const;
  std::vector<std::pair<std::string, std::string>> serialize() const;
};

/// Registers every encoder parameter (embeddings, per-head attention,
/// FFN, layer norms, MLM projection) with normal(0, 0.02) weights, zero
/// biases and unit layer-norm gains.
void init_parameters(ParameterSet& params, const ModelConfig& cfg, Rng& rng);

/// Adds the classification head parameters (dense over [CLS]).
void init_cls_head(ParameterSet& params, const ModelConfig& cfg, int num_classes, Rng& rng);
/// Adds the per-token labeling head parameters.
void init_token_head(ParameterSet& params, const ModelConfig& cfg, int num_labels, Rng& rng);

/// Records the full encoder forward pass: token + position embeddings, then
/// pre-norm blocks (masked self-attention, FFN, residuals), then a final
/// layer norm. Returns the [n, hidden] content-embedding node.
/// `dropout_rng` enables inverted dropout when non-null and cfg.dropout > 0.
NodeId encode_sequence(ValueGraph& g, const std::vector<int>& ids, const ModelConfig& cfg,
                       Rng* dropout_rng = nullptr);

/// Per-position vocabulary distributions (softmax of the shared untied
/// projection) for the given embedding rows.
NodeId mlm_distributions(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions,
                         const ModelConfig& cfg);
/// Raw logits, same gather; feeds the loss and argmax accuracy.
NodeId mlm_logits(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions, const ModelConfig& cfg);

/// Mean negative log-likelihood over the masked positions of the selected
/// mode. Errors when positions is empty (the step is skipped upstream).
NodeId ahm_step_loss(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions,
                     const std::vector<int64_t>& targets, const ModelConfig& cfg);

/// Cross-attention correlation matrices between two content embeddings:
/// A is row-normalized over b's tokens, B column-normalized over a's tokens.
/// Bt is B's transpose ([n_b, n_a], row-normalized), kept because both
/// reconstructions are matmuls against row-stochastic matrices.
struct CrossAttention {
  NodeId a_matrix;   // [n_a, n_b], rows sum to 1
  NodeId b_matrix;   // [n_a, n_b], columns sum to 1
  NodeId bt_matrix;  // [n_b, n_a]
};

CrossAttention cross_attention(ValueGraph& g, NodeId w_content, NodeId o_content);

struct Reconstruction {
  NodeId w_prime;  // [n_a, d] rebuilt from o
  NodeId o_prime;  // [n_b, d] rebuilt from w
};

Reconstruction reconstruct(ValueGraph& g, const CrossAttention& attn, NodeId w_content, NodeId o_content);

/// sum_i ||w_i - w'_i||^2 + sum_j ||o_j - o'_j||^2.
NodeId pair_distance(ValueGraph& g, NodeId w_content, NodeId o_content, const Reconstruction& recon);

/// Convenience: cross attention + reconstruction + distance in one call.
NodeId pair_distance_full(ValueGraph& g, NodeId w_content, NodeId o_content);

/// max(0, 1 + pos - neg); margin fixed at 1, gradients flow through both
/// distances.
NodeId npr_loss(ValueGraph& g, NodeId pos_distance, NodeId neg_distance);

/// softmax(dense([CLS] row)) class distribution.
NodeId cls_distribution(ValueGraph& g, NodeId hidden, int num_classes);
NodeId cls_logits(ValueGraph& g, NodeId hidden, int num_classes);

/// Shared dense + softmax on every position (BIO-style labeling shape).
NodeId token_distributions(ValueGraph& g, NodeId hidden, int num_labels);
NodeId token_logits(ValueGraph& g, NodeId hidden, int num_labels);

}  // namespace ebert
