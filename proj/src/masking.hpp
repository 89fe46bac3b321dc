#pragma once

#include <map>
#include <string>
#include <vector>

#include "phrase.hpp"
#include "text.hpp"
#include "util.hpp"

namespace ebert {

enum class Mode { Word, Phrase };

const char* mode_name(Mode mode);

/// Target id at positions excluded from the loss.
constexpr int kIgnoreTarget = -1;

struct MaskingPlan {
  Mode mode = Mode::Word;
  std::vector<size_t> positions;           // distinct, sorted, never on specials
  std::vector<PhraseSpan> accepted_spans;  // phrase mode: spans masked whole
  std::vector<size_t> fill_positions;      // phrase mode: word-style top-up
  bool skip = false;                       // nothing maskable

  size_t masked_count() const { return positions.size(); }
};

/// Positions eligible for masking: everything except [PAD]/[CLS]/[SEP].
std::vector<size_t> maskable_positions(const TokenSequence& seq);

/// Uniformly samples max(1, round(rate * n')) distinct maskable positions.
MaskingPlan plan_word_mask(const TokenSequence& seq, Rng& rng, double rate = 0.15);

/// Draws one span with probability exp(score_i) / sum_j exp(score_j) and
/// removes it from the candidate list.
PhraseSpan sample_phrase(std::vector<PhraseSpan>& candidates, Rng& rng);

/// Samples spans without replacement under a ceil(rate * n') token budget;
/// a drawn span that no longer fits is discarded. Leftover budget is filled
/// with word-style positions. An empty temp pool falls back to a word-sized
/// plan (still tagged Phrase).
MaskingPlan plan_phrase_mask(const TokenSequence& seq, const TempPool& pool, Rng& rng, double rate = 0.15);

struct CorruptResult {
  std::vector<int> ids;      // corrupted input
  std::vector<int> targets;  // original id at masked positions, kIgnoreTarget elsewhere
};

/// 80% [MASK], 10% random non-special token, 10% unchanged, independently
/// per masked position.
CorruptResult corrupt(const TokenSequence& seq, const MaskingPlan& plan, Rng& rng, const Vocabulary& vocab);

struct ControllerConfig {
  double alpha0 = 0.9;     // initial-stage word probability, in (0.5, 1]
  long t1_iters = 100;     // initial-stage length
  double ema_decay = 0.9;  // 0 disables smoothing (raw per-step losses)
  double eps = 1e-8;
};

/// The adaptive switching state: per-mode loss history, fitting indices and
/// the word-mode probability alpha. One instance per training run,
/// single-writer, updated once per iteration.
class Controller {
 public:
  explicit Controller(ControllerConfig cfg);

  /// Starts iteration t+1: recomputes alpha (alpha0 while t <= T1, else
  /// tanh(eta_w / max(eta_p, eps))) and draws the mode.
  Mode select_mode(Rng& rng);

  /// Records the selected mode's loss for the iteration started by the last
  /// select_mode call. Smooths with the EMA, shifts the (prev, cur) pair,
  /// pins the first-selection loss and recomputes that mode's fitting index.
  void update(Mode mode, double loss);

  long iteration() const { return t_; }
  double alpha() const { return alpha_; }
  double eta_word() const { return word_.eta; }
  double eta_phrase() const { return phrase_.eta; }
  double ema_word() const { return word_.ema; }
  double ema_phrase() const { return phrase_.ema; }
  const ControllerConfig& config() const { return cfg_; }

  std::map<std::string, std::string> serialize() const;
  static Controller deserialize(const std::map<std::string, std::string>& kv);

 private:
  struct ModeStats {
    double first = 0.0;
    double prev = 0.0;
    double cur = 0.0;
    double ema = 0.0;
    long count = 0;
    double eta = 1.0;  // 1 until the mode has been selected twice
  };

  ModeStats& stats(Mode mode) { return mode == Mode::Word ? word_ : phrase_; }
  const ModeStats& stats(Mode mode) const { return mode == Mode::Word ? word_ : phrase_; }

  ControllerConfig cfg_;
  long t_ = 0;
  double alpha_;
  ModeStats word_;
  ModeStats phrase_;
};

}  // namespace ebert
