#include "masking.hpp"

#include <algorithm>
#include <cmath>

namespace ebert {

const char* mode_name(Mode mode) { return mode == Mode::Word ? "word" : "phrase"; }

std::vector<size_t> maskable_positions(const TokenSequence& seq) {
  std::vector<size_t> out;
  for (size_t i = 0; i < seq.length(); ++i) {
    int id = seq.ids[i];
    if (id == Vocabulary::kPad || id == Vocabulary::kCls || id == Vocabulary::kSep) continue;
    out.push_back(i);
  }
  return out;
}

namespace {

size_t word_mask_count(size_t maskable, double rate) {
  return std::max<size_t>(1, size_t(std::llround(rate * double(maskable))));
}

// Distinct uniform draws via partial Fisher-Yates over the candidate list.
std::vector<size_t> sample_distinct(std::vector<size_t> candidates, size_t k, Rng& rng) {
  k = std::min(k, candidates.size());
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + size_t(rng.uniform_below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(k);
  return candidates;
}

}  // namespace

MaskingPlan plan_word_mask(const TokenSequence& seq, Rng& rng, double rate) {
  MaskingPlan plan;
  plan.mode = Mode::Word;
  auto maskable = maskable_positions(seq);
  if (maskable.empty()) {
    plan.skip = true;
    return plan;
  }
  size_t k = word_mask_count(maskable.size(), rate);
  plan.positions = sample_distinct(std::move(maskable), k, rng);
  std::sort(plan.positions.begin(), plan.positions.end());
  return plan;
}

PhraseSpan sample_phrase(std::vector<PhraseSpan>& candidates, Rng& rng) {
  if (candidates.empty()) throw_invalid("sample_phrase: empty candidate pool, fall back to word positions");
  double denom = 0.0;
  for (const auto& span : candidates) denom += std::exp(span.score);
  double r = rng.uniform() * denom;
  double acc = 0.0;
  size_t chosen = candidates.size() - 1;
  for (size_t i = 0; i < candidates.size(); ++i) {
    acc += std::exp(candidates[i].score);
    if (r < acc) {
      chosen = i;
      break;
    }
  }
  PhraseSpan out = candidates[chosen];
  candidates.erase(candidates.begin() + long(chosen));
  return out;
}

MaskingPlan plan_phrase_mask(const TokenSequence& seq, const TempPool& pool, Rng& rng, double rate) {
  MaskingPlan plan;
  plan.mode = Mode::Phrase;
  auto maskable = maskable_positions(seq);
  if (maskable.empty()) {
    plan.skip = true;
    return plan;
  }

  if (pool.empty()) {
    // Fallback: word-sized plan, still a phrase-mode iteration.
    size_t k = word_mask_count(maskable.size(), rate);
    plan.fill_positions = sample_distinct(maskable, k, rng);
    plan.positions = plan.fill_positions;
    std::sort(plan.positions.begin(), plan.positions.end());
    std::sort(plan.fill_positions.begin(), plan.fill_positions.end());
    return plan;
  }

  size_t budget = size_t(std::ceil(rate * double(maskable.size())));
  budget = std::min(budget, maskable.size());
  std::vector<PhraseSpan> candidates = pool.spans;
  size_t taken = 0;

  auto any_fits = [&]() {
    for (const auto& span : candidates)
      if (taken + span.size() <= budget) return true;
    return false;
  };

  while (taken < budget && !candidates.empty() && any_fits()) {
    PhraseSpan span = sample_phrase(candidates, rng);
    if (taken + span.size() > budget) continue;  // drawn without replacement, discarded
    plan.accepted_spans.push_back(span);
    for (size_t p = span.begin; p < span.end; ++p) plan.positions.push_back(p);
    taken += span.size();
  }

  if (taken < budget) {
    std::vector<size_t> uncovered;
    for (size_t p : maskable) {
      bool in_span = false;
      for (const auto& span : plan.accepted_spans)
        if (p >= span.begin && p < span.end) {
          in_span = true;
          break;
        }
      if (!in_span) uncovered.push_back(p);
    }
    plan.fill_positions = sample_distinct(std::move(uncovered), budget - taken, rng);
    plan.positions.insert(plan.positions.end(), plan.fill_positions.begin(), plan.fill_positions.end());
  }
  std::sort(plan.positions.begin(), plan.positions.end());
  std::sort(plan.fill_positions.begin(), plan.fill_positions.end());
  return plan;
}

CorruptResult corrupt(const TokenSequence& seq, const MaskingPlan& plan, Rng& rng, const Vocabulary& vocab) {
  CorruptResult out;
  out.ids = seq.ids;
  out.targets.assign(seq.length(), kIgnoreTarget);
  size_t vocab_size = vocab.size();
  for (size_t p : plan.positions) {
    if (p >= seq.length()) throw_invalid("corrupt: plan position " + std::to_string(p) + " out of range");
    out.targets[p] = seq.ids[p];
    double r = rng.uniform();
    if (r < 0.8) {
      out.ids[p] = Vocabulary::kMask;
    } else if (r < 0.9) {
      if (vocab_size > size_t(Vocabulary::kNumSpecials)) {
        out.ids[p] = Vocabulary::kNumSpecials +
                     int(rng.uniform_below(uint64_t(vocab_size - Vocabulary::kNumSpecials)));
      } else {
        out.ids[p] = Vocabulary::kMask;
      }
    }  // else keep the original token
  }
  return out;
}

// ---- adaptive switching controller ----

Controller::Controller(ControllerConfig cfg) : cfg_(cfg), alpha_(cfg.alpha0) {
  if (!(cfg_.alpha0 > 0.5 && cfg_.alpha0 <= 1.0))
    throw_invalid("controller: alpha0 must lie in (0.5, 1]");
  if (cfg_.t1_iters < 0) throw_invalid("controller: t1_iters must be >= 0");
  if (cfg_.ema_decay < 0.0 || cfg_.ema_decay >= 1.0)
    throw_invalid("controller: ema_decay must lie in [0, 1)");
}

Mode Controller::select_mode(Rng& rng) {
  ++t_;
  if (t_ <= cfg_.t1_iters) {
    alpha_ = cfg_.alpha0;
  } else {
    double gamma = word_.eta / std::max(phrase_.eta, cfg_.eps);
    alpha_ = std::clamp(std::tanh(gamma), 0.0, 1.0);
  }
  return rng.uniform() < alpha_ ? Mode::Word : Mode::Phrase;
}

void Controller::update(Mode mode, double loss) {
  if (!std::isfinite(loss)) throw_numeric("controller: non-finite " + std::string(mode_name(mode)) + " loss");
  ModeStats& s = stats(mode);
  double smoothed = s.count == 0 ? loss : cfg_.ema_decay * s.ema + (1.0 - cfg_.ema_decay) * loss;
  s.ema = smoothed;
  ++s.count;
  if (s.count == 1) {
    s.first = smoothed;
    s.prev = smoothed;
    s.cur = smoothed;
    s.eta = 1.0;
    return;
  }
  s.prev = s.cur;
  s.cur = smoothed;
  double num = std::max(s.prev - s.cur, 0.0);
  double den = std::max(s.first - s.cur, cfg_.eps);
  s.eta = num / den;
}

std::map<std::string, std::string> Controller::serialize() const {
  std::map<std::string, std::string> kv;
  kv["controller.t"] = std::to_string(t_);
  kv["controller.alpha"] = format_double(alpha_);
  kv["controller.alpha0"] = format_double(cfg_.alpha0);
  kv["controller.t1_iters"] = std::to_string(cfg_.t1_iters);
  kv["controller.ema_decay"] = format_double(cfg_.ema_decay);
  kv["controller.eps"] = format_double(cfg_.eps);
  auto dump = [&](const char* prefix, const ModeStats& s) {
    std::string p = prefix;
    kv[p + ".first"] = format_double(s.first);
    kv[p + ".prev"] = format_double(s.prev);
    kv[p + ".cur"] = format_double(s.cur);
    kv[p + ".ema"] = format_double(s.ema);
    kv[p + ".count"] = std::to_string(s.count);
    kv[p + ".eta"] = format_double(s.eta);
  };
  dump("controller.word", word_);
  dump("controller.phrase", phrase_);
  return kv;
}

Controller Controller::deserialize(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw_data("controller state: missing key " + key);
    return it->second;
  };
  ControllerConfig cfg;
  cfg.alpha0 = parse_double(get("controller.alpha0"), "controller.alpha0");
  cfg.t1_iters = parse_long(get("controller.t1_iters"), "controller.t1_iters");
  cfg.ema_decay = parse_double(get("controller.ema_decay"), "controller.ema_decay");
  cfg.eps = parse_double(get("controller.eps"), "controller.eps");
  Controller c(cfg);
  c.t_ = parse_long(get("controller.t"), "controller.t");
  c.alpha_ = parse_double(get("controller.alpha"), "controller.alpha");
  auto load = [&](const char* prefix, ModeStats& s) {
    std::string p = prefix;
    s.first = parse_double(get(p + ".first"), p);
    s.prev = parse_double(get(p + ".prev"), p);
    s.cur = parse_double(get(p + ".cur"), p);
    s.ema = parse_double(get(p + ".ema"), p);
    s.count = parse_long(get(p + ".count"), p);
    s.eta = parse_double(get(p + ".eta"), p);
  };
  load("controller.word", c.word_);
  load("controller.phrase", c.phrase_);
  return c;
}

}  // namespace ebert
