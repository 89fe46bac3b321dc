#include "encoder.hpp"

#include <cmath>

namespace ebert {

void ModelConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ffn < 1) throw_invalid("model config: sizes must be positive");
  if (hidden % heads != 0) throw_invalid("model config: hidden must be divisible by heads");
  if (max_len < 2) throw_invalid("model config: max_len must be >= 2");
  if (vocab < Vocabulary::kNumSpecials + 1) throw_invalid("model config: vocab size not set");
  if (dropout < 0.0 || dropout >= 1.0) throw_invalid("model config: dropout must lie in [0, 1)");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::serialize() const {
  return {
      {"model.layers", std::to_string(layers)},   {"model.hidden", std::to_string(hidden)},
      {"model.heads", std::to_string(heads)},     {"model.ffn", std::to_string(ffn)},
      {"model.max_len", std::to_string(max_len)}, {"model.vocab", std::to_string(vocab)},
      {"model.dropout", format_double(dropout)},
  };
}

namespace {

Tensor normal_init(std::vector<size_t> shape, Rng& rng, double stddev = 0.02) {
  Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Tensor ones(std::vector<size_t> shape) {
  Tensor t(std::move(shape));
  t.fill(1.0);
  return t;
}

std::string layer_prefix(int layer) { return "layer" + std::to_string(layer); }

// layer_norm followed by the learned affine (gain, bias).
NodeId affine_layer_norm(ValueGraph& g, NodeId x, const std::string& prefix) {
  NodeId normed = g.layer_norm(x);
  return g.add(g.multiply(normed, g.param(prefix + ".g")), g.param(prefix + ".b"));
}

NodeId maybe_dropout(ValueGraph& g, NodeId x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  const Tensor& v = g.value(x);
  Tensor mask(v.shape());
  double keep = 1.0 - rate;
  for (size_t i = 0; i < mask.size(); ++i) mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
  return g.multiply(x, g.input(std::move(mask)));
}

}  // namespace

void init_parameters(ParameterSet& params, const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  size_t d = size_t(cfg.hidden), f = size_t(cfg.ffn), v = size_t(cfg.vocab);
  size_t dh = size_t(cfg.head_dim());

  params.add("embed.token", normal_init({v, d}, rng));
  params.add("embed.pos", normal_init({size_t(cfg.max_len), d}, rng));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = layer_prefix(l);
    params.add(p + ".ln1.g", ones({d}));
    params.add(p + ".ln1.b", Tensor({d}));
    for (int h = 0; h < cfg.heads; ++h) {
      std::string hp = p + ".attn.h" + std::to_string(h);
      params.add(hp + ".wq", normal_init({d, dh}, rng));
      params.add(hp + ".bq", Tensor({dh}));
      params.add(hp + ".wk", normal_init({d, dh}, rng));
      params.add(hp + ".bk", Tensor({dh}));
      params.add(hp + ".wv", normal_init({d, dh}, rng));
      params.add(hp + ".bv", Tensor({dh}));
    }
    params.add(p + ".attn.wo", normal_init({d, d}, rng));
    params.add(p + ".attn.bo", Tensor({d}));
    params.add(p + ".ln2.g", ones({d}));
    params.add(p + ".ln2.b", Tensor({d}));
    params.add(p + ".ffn.w1", normal_init({d, f}, rng));
    params.add(p + ".ffn.b1", Tensor({f}));
    params.add(p + ".ffn.w2", normal_init({f, d}, rng));
    params.add(p + ".ffn.b2", Tensor({d}));
  }
  params.add("final_ln.g", ones({d}));
  params.add("final_ln.b", Tensor({d}));
  // untied vocabulary projection of the shared softmax layer
  params.add("mlm.w", normal_init({d, v}, rng));
}

void init_cls_head(ParameterSet& params, const ModelConfig& cfg, int num_classes, Rng& rng) {
  if (num_classes < 2) throw_invalid("cls head: need at least 2 classes");
  params.add("cls_head.w", normal_init({size_t(cfg.hidden), size_t(num_classes)}, rng));
  params.add("cls_head.b", Tensor({size_t(num_classes)}));
}

void init_token_head(ParameterSet& params, const ModelConfig& cfg, int num_labels, Rng& rng) {
  if (num_labels < 2) throw_invalid("token head: need at least 2 labels");
  params.add("token_head.w", normal_init({size_t(cfg.hidden), size_t(num_labels)}, rng));
  params.add("token_head.b", Tensor({size_t(num_labels)}));
}

NodeId encode_sequence(ValueGraph& g, const std::vector<int>& ids, const ModelConfig& cfg, Rng* dropout_rng) {
  size_t n = ids.size();
  if (n == 0) throw_invalid("encode_sequence: empty input");
  if (n > size_t(cfg.max_len))
    throw_invalid("encode_sequence: length " + std::to_string(n) + " exceeds max_len " +
                  std::to_string(cfg.max_len));

  std::vector<int64_t> token_idx(n), pos_idx(n);
  bool has_pad = false;
  for (size_t i = 0; i < n; ++i) {
    token_idx[i] = ids[i];
    pos_idx[i] = int64_t(i);
    if (ids[i] == Vocabulary::kPad) has_pad = true;
  }

  NodeId x = g.add(g.embedding_lookup(g.param("embed.token"), token_idx),
                   g.embedding_lookup(g.param("embed.pos"), pos_idx));

  // Additive key mask: [PAD] columns get a large negative score so real
  // positions never attend to padding.
  NodeId key_mask = -1;
  if (has_pad) {
    Tensor mask({n, n});
    for (size_t j = 0; j < n; ++j) {
      if (ids[j] != Vocabulary::kPad) continue;
      for (size_t i = 0; i < n; ++i) mask.at(i, j) = -1e9;
    }
    key_mask = g.input(std::move(mask));
  }

  double inv_sqrt_dh = 1.0 / std::sqrt(double(cfg.head_dim()));
  for (int l = 0; l < cfg.layers; ++l) {
    std::string p = layer_prefix(l);
    NodeId xn = affine_layer_norm(g, x, p + ".ln1");
    NodeId heads_out = -1;
    for (int h = 0; h < cfg.heads; ++h) {
      std::string hp = p + ".attn.h" + std::to_string(h);
      NodeId q = g.add(g.matmul(xn, g.param(hp + ".wq")), g.param(hp + ".bq"));
      NodeId k = g.add(g.matmul(xn, g.param(hp + ".wk")), g.param(hp + ".bk"));
      NodeId v = g.add(g.matmul(xn, g.param(hp + ".wv")), g.param(hp + ".bv"));
      NodeId scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dh);
      if (key_mask >= 0) scores = g.add(scores, key_mask);
      NodeId ctx = g.matmul(g.softmax(scores), v);
      heads_out = h == 0 ? ctx : g.concat(heads_out, ctx, 1);
    }
    NodeId attn = g.add(g.matmul(heads_out, g.param(p + ".attn.wo")), g.param(p + ".attn.bo"));
    attn = maybe_dropout(g, attn, cfg.dropout, dropout_rng);
    x = g.add(x, attn);

    NodeId xn2 = affine_layer_norm(g, x, p + ".ln2");
    NodeId hidden = g.relu(g.add(g.matmul(xn2, g.param(p + ".ffn.w1")), g.param(p + ".ffn.b1")));
    NodeId ffn = g.add(g.matmul(hidden, g.param(p + ".ffn.w2")), g.param(p + ".ffn.b2"));
    ffn = maybe_dropout(g, ffn, cfg.dropout, dropout_rng);
    x = g.add(x, ffn);
  }
  return affine_layer_norm(g, x, "final_ln");
}

NodeId mlm_logits(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions, const ModelConfig& cfg) {
  (void)cfg;
  if (positions.empty()) throw_invalid("mlm_logits: no positions given");
  NodeId gathered = g.embedding_lookup(hidden, positions);
  return g.matmul(gathered, g.param("mlm.w"));
}

NodeId mlm_distributions(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions,
                         const ModelConfig& cfg) {
  return g.softmax(mlm_logits(g, hidden, positions, cfg));
}

NodeId ahm_step_loss(ValueGraph& g, NodeId hidden, const std::vector<int64_t>& positions,
                     const std::vector<int64_t>& targets, const ModelConfig& cfg) {
  if (positions.empty()) throw_invalid("ahm_step_loss: zero masked positions, skip this sequence");
  if (positions.size() != targets.size())
    throw_invalid("ahm_step_loss: positions/targets size mismatch");
  NodeId logits = mlm_logits(g, hidden, positions, cfg);
  return g.cross_entropy_from_logits(logits, targets);
}

CrossAttention cross_attention(ValueGraph& g, NodeId w_content, NodeId o_content) {
  const Tensor& w = g.value(w_content);
  const Tensor& o = g.value(o_content);
  if (w.rank() != 2 || o.rank() != 2 || w.shape()[1] != o.shape()[1])
    throw_invalid("cross_attention: contents must be [n,d] with matching d");
  if (w.shape()[0] == 0 || o.shape()[0] == 0) throw_invalid("cross_attention: empty content");

  // Raw dot products, no scaling; softmax handles stability via
  // max-subtraction.
  NodeId scores = g.matmul(w_content, g.transpose(o_content));  // [n_a, n_b]
  CrossAttention attn;
  attn.a_matrix = g.softmax(scores);
  attn.bt_matrix = g.softmax(g.transpose(scores));
  attn.b_matrix = g.transpose(attn.bt_matrix);
  return attn;
}

Reconstruction reconstruct(ValueGraph& g, const CrossAttention& attn, NodeId w_content, NodeId o_content) {
  Reconstruction recon;
  recon.w_prime = g.matmul(attn.a_matrix, o_content);
  recon.o_prime = g.matmul(attn.bt_matrix, w_content);
  return recon;
}

NodeId pair_distance(ValueGraph& g, NodeId w_content, NodeId o_content, const Reconstruction& recon) {
  NodeId dw = g.squared_euclidean(w_content, recon.w_prime);
  NodeId dd = g.squared_euclidean(o_content, recon.o_prime);
  return g.add(dw, dd);
}

NodeId pair_distance_full(ValueGraph& g, NodeId w_content, NodeId o_content) {
  CrossAttention attn = cross_attention(g, w_content, o_content);
  Reconstruction recon = reconstruct(g, attn, w_content, o_content);
  return pair_distance(g, w_content, o_content, recon);
}

NodeId npr_loss(ValueGraph& g, NodeId pos_distance, NodeId neg_distance) {
  NodeId margin = g.input(Tensor::scalar(1.0));
  NodeId diff = g.add(g.add(margin, pos_distance), g.scale(neg_distance, -1.0));
  return g.hinge(diff);
}

NodeId cls_logits(ValueGraph& g, NodeId hidden, int num_classes) {
  (void)num_classes;
  NodeId cls_row = g.embedding_lookup(hidden, {0});
  return g.add(g.matmul(cls_row, g.param("cls_head.w")), g.param("cls_head.b"));
}

NodeId cls_distribution(ValueGraph& g, NodeId hidden, int num_classes) {
  return g.softmax(cls_logits(g, hidden, num_classes));
}

NodeId token_logits(ValueGraph& g, NodeId hidden, int num_labels) {
  (void)num_labels;
  return g.add(g.matmul(hidden, g.param("token_head.w")), g.param("token_head.b"));
}

NodeId token_distributions(ValueGraph& g, NodeId hidden, int num_labels) {
  return g.softmax(token_logits(g, hidden, num_labels));
}

}  // namespace ebert
