#pragma once

#include <optional>
#include <string>
#include <vector>

#include "assoc_graph.hpp"
#include "config.hpp"
#include "encoder.hpp"
#include "masking.hpp"
#include "phrase.hpp"
#include "tensor.hpp"
#include "text.hpp"
#include "util.hpp"

namespace ebert {

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// Global-norm clipping followed by the bias-corrected Adam update.
/// `step` is 1-based. Non-finite gradients halt with the parameter name.
void adam_step(ParameterSet& params, const AdamParams& adam, long step);

struct TrainConfig {
  std::string products_path;
  std::string reviews_path;
  std::string vocab_path;
  std::string pool_path;
  std::string graph_path;
  std::string out_dir;
  std::string init_checkpoint;
  std::string pos_lexicon;

  ModelConfig model;
  AdamParams adam;
  long batch_size = 8;
  long train_steps = 1000;
  long checkpoint_every = 0;  // 0: only at the end
  long log_every = 1;
  double lambda_npr = 1.0;
  uint64_t rng_seed = 42;

  double mask_rate = 0.15;
  ControllerConfig controller;
  std::string masking_scheme = "ahm";  // ahm | word | phrase

  static TrainConfig from_config(const Config& cfg);
  void validate_scheme() const;
};

/// Everything a checkpoint directory holds: a plain-text manifest with the
/// model configuration, trainer/controller state and RNG streams, plus one
/// little-endian raw f64 file per parameter (and per Adam moment pair when
/// training state is saved).
struct TrainerState {
  long step = 0;
  long adam_t = 0;
  std::string phase = "ahm_only";
  long epoch = 0;
  long cursor = 0;
  std::string rng_mode;
  std::string rng_mask;
  std::string rng_graph;
  std::string rng_dropout;
};

struct Checkpoint {
  ModelConfig model;
  ParameterSet params;
  std::optional<Controller> controller;
  TrainerState state;
  bool has_moments = false;
  std::vector<std::string> cls_labels;
};

void save_checkpoint(const std::string& dir, const ModelConfig& model, const ParameterSet& params,
                     const Controller* controller, const TrainerState& state, bool save_moments,
                     const std::vector<std::string>& cls_labels = {});
Checkpoint load_checkpoint(const std::string& dir);

struct TrainResult {
  long steps = 0;
  double final_loss_ahm = 0.0;
  double final_loss_npr = 0.0;
  std::string checkpoint_dir;
};

/// Phase 1: AHM alone over the product + review corpora. Writes metrics.csv,
/// controller_trace.csv and a checkpoint under out_dir.
TrainResult train_ahm(const TrainConfig& cfg);

/// Phase 2: AHM (product corpus only) + lambda * NPR per step, one optimizer
/// update. Requires an init checkpoint and a non-empty association graph.
/// The review corpus is never touched here.
TrainResult train_joint(const TrainConfig& cfg);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  long masked_tokens = 0;
};

/// Deterministic masked-token evaluation of a checkpoint in one masking
/// mode. The pool path is required for phrase mode.
EvalResult eval_mlm(const std::string& checkpoint_dir, const std::string& products_path,
                    const std::string& reviews_path, const std::string& pool_path, Mode mode, uint64_t seed);

/// Writes the cross-attention matrices for a product pair as CSV, alpha then
/// beta, with token surface forms as headers.
void probe_attention(const std::string& checkpoint_dir, const std::string& products_path, const std::string& id_a,
                     const std::string& id_b, const std::string& out_csv);

struct FinetuneResult {
  double train_accuracy = 0.0;
  long classes = 0;
  std::string checkpoint_dir;
};

/// CLS-head sequence classification on `label<TAB>text` data, fine-tuning
/// the full encoder from a pre-trained checkpoint.
FinetuneResult finetune_classify(const std::string& checkpoint_dir, const std::string& data_path,
                                 const std::string& out_dir, long epochs, double learning_rate, uint64_t seed);

// ---- shared data plumbing (also used by tests and the acceptance suite) ----

struct TrainingItem {
  TokenSequence seq;
  TempPool temp_pool;
  bool from_review = false;
};

std::vector<TrainingItem> load_training_items(const std::string& products_path, const std::string& reviews_path,
                                              const Vocabulary& vocab, const PhrasePool& pool,
                                              const PosTagger& tagger, int max_len);

std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, long epoch);

}  // namespace ebert
