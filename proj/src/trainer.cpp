#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace ebert {

namespace fs = std::filesystem;

// ---- optimizer ----

void adam_step(ParameterSet& params, const AdamParams& adam, long step) {
  if (step < 1) throw_invalid("adam_step: step must be >= 1");
  double sq = 0.0;
  for (const auto& name : params.names()) {
    const Tensor& g = params.entry(name).grad;
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw_numeric("adam_step: non-finite gradient in parameter " + name);
      sq += g[i] * g[i];
    }
  }
  double norm = std::sqrt(sq);
  double clip = (adam.clip_norm > 0.0 && norm > adam.clip_norm) ? adam.clip_norm / norm : 1.0;
  double bc1 = 1.0 - std::pow(adam.beta1, double(step));
  double bc2 = 1.0 - std::pow(adam.beta2, double(step));
  for (const auto& name : params.names()) {
    auto& e = params.entry(name);
    for (size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad[i] * clip;
      e.m[i] = adam.beta1 * e.m[i] + (1.0 - adam.beta1) * g;
      e.v[i] = adam.beta2 * e.v[i] + (1.0 - adam.beta2) * g * g;
      double m_hat = e.m[i] / bc1;
      double v_hat = e.v[i] / bc2;
      e.value[i] -= adam.learning_rate * m_hat / (std::sqrt(v_hat) + adam.eps);
    }
  }
}

// ---- config ----

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig tc;
  tc.products_path = cfg.get_string("products", "");
  tc.reviews_path = cfg.get_string("reviews", "");
  tc.vocab_path = cfg.get_string("vocab", "");
  tc.pool_path = cfg.get_string("phrase_pool", "");
  tc.graph_path = cfg.get_string("graph", "");
  tc.out_dir = cfg.get_string("out_dir", "");
  tc.init_checkpoint = cfg.get_string("init_checkpoint", "");
  tc.pos_lexicon = cfg.get_string("pos_lexicon", "");

  tc.model.layers = int(cfg.get_long("layers", 2));
  tc.model.hidden = int(cfg.get_long("hidden_size", 64));
  tc.model.heads = int(cfg.get_long("num_heads", 2));
  tc.model.ffn = int(cfg.get_long("ffn_size", 128));
  tc.model.max_len = int(cfg.get_long("max_seq_len", 128));
  tc.model.dropout = cfg.get_double("dropout", 0.0);

  tc.adam.learning_rate = cfg.get_double("learning_rate", 1e-3);
  tc.adam.beta1 = cfg.get_double("adam_beta1", 0.9);
  tc.adam.beta2 = cfg.get_double("adam_beta2", 0.999);
  tc.adam.eps = cfg.get_double("adam_eps", 1e-8);
  tc.adam.clip_norm = cfg.get_double("clip_norm", 1.0);
  tc.batch_size = cfg.get_long("batch_size", 8);
  tc.train_steps = cfg.get_long("train_steps", 1000);
  tc.checkpoint_every = cfg.get_long("checkpoint_every", 0);
  tc.log_every = cfg.get_long("log_every", 1);
  tc.lambda_npr = cfg.get_double("lambda_npr", 1.0);
  tc.rng_seed = cfg.get_seed("rng_seed", 42);

  tc.mask_rate = cfg.get_double("mask_rate", 0.15);
  tc.controller.alpha0 = cfg.get_double("alpha0", 0.9);
  tc.controller.t1_iters = cfg.get_long("t1_iters", 100);
  tc.controller.ema_decay = cfg.get_double("ema_decay", 0.9);
  tc.masking_scheme = cfg.get_string("masking_scheme", "ahm");
  tc.validate_scheme();
  return tc;
}

void TrainConfig::validate_scheme() const {
  if (masking_scheme != "ahm" && masking_scheme != "word" && masking_scheme != "phrase")
    throw_invalid("masking_scheme must be ahm, word or phrase, got '" + masking_scheme + "'");
  if (batch_size < 1) throw_invalid("batch_size must be >= 1");
  if (adam.learning_rate <= 0) throw_invalid("learning_rate must be > 0");
  if (train_steps < 0) throw_invalid("train_steps must be >= 0");
}

// ---- checkpoint io ----

namespace {

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot write " + path);
  out.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
  if (!out) throw_io("short write on " + path);
}

Tensor read_tensor_file(const std::string& path, std::vector<size_t> shape) {
  Tensor t(std::move(shape));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot read " + path);
  in.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.size() * sizeof(double)));
  if (size_t(in.gcount()) != t.size() * sizeof(double))
    throw_data(path + ": expected " + std::to_string(t.size() * sizeof(double)) + " bytes");
  return t;
}

std::string shape_spec(const Tensor& t) {
  std::string s;
  for (size_t i = 0; i < t.shape().size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(t.shape()[i]);
  }
  return s;
}

std::vector<size_t> parse_shape_spec(const std::string& s) {
  std::vector<size_t> shape;
  for (const auto& part : split(s, 'x')) shape.push_back(size_t(parse_long(part, "shape spec")));
  return shape;
}

}  // namespace

void save_checkpoint(const std::string& dir, const ModelConfig& model, const ParameterSet& params,
                     const Controller* controller, const TrainerState& state, bool save_moments,
                     const std::vector<std::string>& cls_labels) {
  fs::path tmp = dir + ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);

  std::string manifest = "format = ebert.checkpoint.v1\n";
  for (const auto& [k, v] : model.serialize()) manifest += k + " = " + v + "\n";
  manifest += "trainer.step = " + std::to_string(state.step) + "\n";
  manifest += "trainer.adam_t = " + std::to_string(state.adam_t) + "\n";
  manifest += "trainer.phase = " + state.phase + "\n";
  manifest += "trainer.epoch = " + std::to_string(state.epoch) + "\n";
  manifest += "trainer.cursor = " + std::to_string(state.cursor) + "\n";
  manifest += "trainer.has_moments = " + std::string(save_moments ? "1" : "0") + "\n";
  manifest += "rng.mode = " + state.rng_mode + "\n";
  manifest += "rng.mask = " + state.rng_mask + "\n";
  manifest += "rng.graph = " + state.rng_graph + "\n";
  manifest += "rng.dropout = " + state.rng_dropout + "\n";
  if (controller) {
    for (const auto& [k, v] : controller->serialize()) manifest += k + " = " + v + "\n";
  }
  if (!cls_labels.empty()) {
    manifest += "cls.num_labels = " + std::to_string(cls_labels.size()) + "\n";
    std::string labels_content;
    for (const auto& l : cls_labels) labels_content += l + "\n";
    atomic_write_file((tmp / "labels.txt").string(), labels_content);
  }
  for (const auto& name : params.names()) {
    const auto& e = params.entry(name);
    std::string file = name + ".bin";
    manifest += "param " + name + " " + shape_spec(e.value) + " f64 " + file + "\n";
    write_tensor_file((tmp / file).string(), e.value);
    if (save_moments) {
      write_tensor_file((tmp / (name + ".m.bin")).string(), e.m);
      write_tensor_file((tmp / (name + ".v.bin")).string(), e.v);
    }
  }
  atomic_write_file((tmp / "manifest.txt").string(), manifest);

  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw_io("checkpoint rename failed: " + dir + " (" + ec.message() + ")");
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::string manifest_path = (fs::path(dir) / "manifest.txt").string();
  std::map<std::string, std::string> kv;
  struct ParamSpec {
    std::string name;
    std::vector<size_t> shape;
    std::string file;
  };
  std::vector<ParamSpec> specs;

  for_each_line(manifest_path, [&](size_t line_no, const std::string& line) {
    if (trim(line).empty()) return;
    if (starts_with(line, "param ")) {
      auto fields = split(line, ' ');
      if (fields.size() != 5 || fields[3] != "f64")
        throw_data(manifest_path + ":" + std::to_string(line_no) + ": bad param line");
      specs.push_back({fields[1], parse_shape_spec(fields[2]), fields[4]});
      return;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_data(manifest_path + ":" + std::to_string(line_no) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  });
  if (kv["format"] != "ebert.checkpoint.v1") throw_data(dir + ": not an ebert checkpoint");

  auto get = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw_data(dir + ": manifest missing key " + key);
    return it->second;
  };

  Checkpoint ckpt;
  ckpt.model.layers = int(parse_long(get("model.layers"), "model.layers"));
  ckpt.model.hidden = int(parse_long(get("model.hidden"), "model.hidden"));
  ckpt.model.heads = int(parse_long(get("model.heads"), "model.heads"));
  ckpt.model.ffn = int(parse_long(get("model.ffn"), "model.ffn"));
  ckpt.model.max_len = int(parse_long(get("model.max_len"), "model.max_len"));
  ckpt.model.vocab = int(parse_long(get("model.vocab"), "model.vocab"));
  ckpt.model.dropout = parse_double(get("model.dropout"), "model.dropout");

  ckpt.state.step = parse_long(get("trainer.step"), "trainer.step");
  ckpt.state.adam_t = parse_long(get("trainer.adam_t"), "trainer.adam_t");
  ckpt.state.phase = get("trainer.phase");
  ckpt.state.epoch = parse_long(get("trainer.epoch"), "trainer.epoch");
  ckpt.state.cursor = parse_long(get("trainer.cursor"), "trainer.cursor");
  ckpt.state.rng_mode = get("rng.mode");
  ckpt.state.rng_mask = get("rng.mask");
  ckpt.state.rng_graph = get("rng.graph");
  ckpt.state.rng_dropout = get("rng.dropout");
  ckpt.has_moments = get("trainer.has_moments") == "1";

  if (kv.count("controller.t")) ckpt.controller = Controller::deserialize(kv);

  if (kv.count("cls.num_labels")) {
    for_each_line((fs::path(dir) / "labels.txt").string(),
                  [&](size_t, const std::string& line) { ckpt.cls_labels.push_back(line); });
  }

  for (const auto& spec : specs) {
    Tensor value = read_tensor_file((fs::path(dir) / spec.file).string(), spec.shape);
    ckpt.params.add(spec.name, std::move(value));
    if (ckpt.has_moments) {
      auto& e = ckpt.params.entry(spec.name);
      e.m = read_tensor_file((fs::path(dir) / (spec.name + ".m.bin")).string(), spec.shape);
      e.v = read_tensor_file((fs::path(dir) / (spec.name + ".v.bin")).string(), spec.shape);
    }
  }
  return ckpt;
}

// ---- data plumbing ----

std::vector<TrainingItem> load_training_items(const std::string& products_path, const std::string& reviews_path,
                                              const Vocabulary& vocab, const PhrasePool& pool,
                                              const PosTagger& tagger, int max_len) {
  std::vector<TrainingItem> items;
  if (!products_path.empty()) {
    for (const auto& doc : read_product_corpus(products_path)) {
      TrainingItem item;
      item.seq = make_product_sequence(doc, vocab, size_t(max_len));
      tagger.tag_sequence(item.seq);
      item.temp_pool = build_temp_pool(item.seq, pool);
      item.from_review = false;
      items.push_back(std::move(item));
    }
  }
  if (!reviews_path.empty()) {
    for (const auto& doc : read_review_corpus(reviews_path)) {
      TrainingItem item;
      item.seq = make_review_sequence(doc, vocab, size_t(max_len));
      tagger.tag_sequence(item.seq);
      item.temp_pool = build_temp_pool(item.seq, pool);
      item.from_review = true;
      items.push_back(std::move(item));
    }
  }
  return items;
}

std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, long epoch) {
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), size_t(0));
  Rng rng(mix_seed(seed, 0x9000 + uint64_t(epoch)));
  rng.shuffle(perm);
  return perm;
}

// ---- training loops ----

namespace {

struct TrainSession {
  TrainConfig cfg;
  Vocabulary vocab;
  PhrasePool pool;
  PosTagger tagger;
  std::vector<TrainingItem> items;
  ParameterSet params;
  Controller controller{ControllerConfig{}};
  TrainerState state;
  Rng rng_mode{0}, rng_mask{0}, rng_graph{0}, rng_dropout{0};
  std::vector<size_t> perm;

  // joint phase extras
  std::optional<AssociationGraph> graph;
  std::unordered_map<std::string, size_t> item_by_product;
};

struct BatchOutcome {
  double loss = 0.0;
  long counted = 0;
  long masked = 0;
  long correct = 0;
};

// Forward + backward for one AHM sequence; gradient accumulates unscaled.
bool ahm_sequence_pass(TrainSession& s, const TrainingItem& item, Mode mode, BatchOutcome& out, Rng* dropout_rng) {
  MaskingPlan plan = mode == Mode::Word ? plan_word_mask(item.seq, s.rng_mask, s.cfg.mask_rate)
                                        : plan_phrase_mask(item.seq, item.temp_pool, s.rng_mask, s.cfg.mask_rate);
  if (plan.skip || plan.positions.empty()) return false;
  CorruptResult cr = corrupt(item.seq, plan, s.rng_mask, s.vocab);

  std::vector<int64_t> positions, targets;
  positions.reserve(plan.positions.size());
  for (size_t p : plan.positions) {
    positions.push_back(int64_t(p));
    targets.push_back(cr.targets[p]);
  }

  ValueGraph g(&s.params);
  NodeId hidden = encode_sequence(g, cr.ids, s.cfg.model, dropout_rng);
  NodeId logits = mlm_logits(g, hidden, positions, s.cfg.model);
  NodeId loss = g.cross_entropy_from_logits(logits, targets);
  out.loss += g.value(loss)[0];
  ++out.counted;

  const Tensor& z = g.value(logits);
  size_t v = z.shape()[1];
  for (size_t r = 0; r < positions.size(); ++r) {
    size_t best = 0;
    for (size_t j = 1; j < v; ++j)
      if (z[r * v + j] > z[r * v + best]) best = j;
    if (int64_t(best) == targets[r]) ++out.correct;
    ++out.masked;
  }
  g.backward(loss);
  return true;
}

std::vector<int64_t> content_positions(const TokenSequence& seq) {
  std::vector<int64_t> out;
  for (size_t i = 0; i < seq.length(); ++i) {
    int id = seq.ids[i];
    if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) continue;
    out.push_back(int64_t(i));
  }
  return out;
}

// One NPR triple: loss recorded always, gradients only when lambda != 0.
double npr_triple_pass(TrainSession& s, Rng* dropout_rng) {
  const auto& graph = *s.graph;
  auto [a, b] = graph.sample_pair(s.rng_graph);
  std::string neg = graph.sample_negative(a, s.rng_graph);

  auto item_of = [&](const std::string& id) -> const TrainingItem& {
    auto it = s.item_by_product.find(id);
    if (it == s.item_by_product.end()) throw_data("npr: product " + id + " has no corpus entry");
    const TrainingItem& item = s.items[it->second];
    if (item.from_review) throw_data("npr: sample " + id + " originates from the review corpus");
    return item;
  };
  const TrainingItem& ia = item_of(a);
  const TrainingItem& ib = item_of(b);
  const TrainingItem& in = item_of(neg);

  ValueGraph g(&s.params);
  auto content_of = [&](const TrainingItem& item) {
    NodeId hidden = encode_sequence(g, item.seq.ids, s.cfg.model, dropout_rng);
    return g.embedding_lookup(hidden, content_positions(item.seq));
  };
  NodeId wa = content_of(ia);
  NodeId ob = content_of(ib);
  NodeId on = content_of(in);
  NodeId pos = pair_distance_full(g, wa, ob);
  NodeId negd = pair_distance_full(g, wa, on);
  NodeId loss = npr_loss(g, pos, negd);
  double value = g.value(loss)[0];
  if (s.cfg.lambda_npr != 0.0) {
    NodeId weighted = g.scale(loss, s.cfg.lambda_npr);
    g.backward(weighted);
  }
  return value;
}

void next_batch(TrainSession& s, std::vector<size_t>& batch) {
  batch.clear();
  for (long b = 0; b < s.cfg.batch_size; ++b) {
    if (s.state.cursor >= long(s.items.size())) {
      ++s.state.epoch;
      s.state.cursor = 0;
      s.perm = epoch_permutation(s.items.size(), s.cfg.rng_seed, s.state.epoch);
    }
    batch.push_back(s.perm[size_t(s.state.cursor++)]);
  }
}

void capture_rngs(TrainSession& s) {
  s.state.rng_mode = s.rng_mode.serialize();
  s.state.rng_mask = s.rng_mask.serialize();
  s.state.rng_graph = s.rng_graph.serialize();
  s.state.rng_dropout = s.rng_dropout.serialize();
}

void write_session_checkpoint(TrainSession& s, const std::string& dir) {
  capture_rngs(s);
  save_checkpoint(dir, s.cfg.model, s.params, &s.controller, s.state, /*save_moments=*/true);
  // Keep the vocabulary beside the weights so eval/probe runs are
  // self-contained.
  if (!s.cfg.vocab_path.empty()) s.vocab.save((fs::path(dir) / "vocab.txt").string());
}

void init_session_common(TrainSession& s, const TrainConfig& cfg, bool joint) {
  s.cfg = cfg;
  s.cfg.validate_scheme();
  if (cfg.out_dir.empty()) throw_invalid("out_dir is required");
  if (cfg.vocab_path.empty()) throw_invalid("vocab path is required");
  fs::create_directories(cfg.out_dir);

  s.vocab = Vocabulary::load(cfg.vocab_path);
  if (!cfg.pool_path.empty()) s.pool = PhrasePool::import_tsv(cfg.pool_path);
  if (!cfg.pos_lexicon.empty()) s.tagger.load_lexicon(cfg.pos_lexicon);

  s.cfg.model.vocab = int(s.vocab.size());
  s.cfg.model.validate();

  if (joint && cfg.reviews_path.empty() == false)
    throw_invalid("train_joint: the joint phase runs on the product corpus only; do not pass reviews");
  s.items = load_training_items(cfg.products_path, joint ? "" : cfg.reviews_path, s.vocab, s.pool, s.tagger,
                                s.cfg.model.max_len);
  if (s.items.empty()) throw_data("empty corpus: no usable training sequences");

  if (!cfg.init_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(cfg.init_checkpoint);
    if (ckpt.model.vocab != s.cfg.model.vocab)
      throw_data("checkpoint vocab size " + std::to_string(ckpt.model.vocab) + " does not match vocabulary " +
                 std::to_string(s.cfg.model.vocab));
    s.cfg.model = ckpt.model;
    s.cfg.model.dropout = cfg.model.dropout;
    s.params = std::move(ckpt.params);
    s.state = ckpt.state;
    if (ckpt.controller) {
      s.controller = *ckpt.controller;
    } else {
      s.controller = Controller(cfg.controller);
    }
    s.rng_mode = Rng::deserialize(s.state.rng_mode);
    s.rng_mask = Rng::deserialize(s.state.rng_mask);
    s.rng_graph = Rng::deserialize(s.state.rng_graph);
    s.rng_dropout = Rng::deserialize(s.state.rng_dropout);
  } else {
    Rng init_rng(mix_seed(cfg.rng_seed, 1));
    init_parameters(s.params, s.cfg.model, init_rng);
    s.controller = Controller(cfg.controller);
    s.state = TrainerState{};
    s.rng_mode = Rng(mix_seed(cfg.rng_seed, 2));
    s.rng_mask = Rng(mix_seed(cfg.rng_seed, 3));
    s.rng_graph = Rng(mix_seed(cfg.rng_seed, 4));
    s.rng_dropout = Rng(mix_seed(cfg.rng_seed, 5));
  }
  s.perm = epoch_permutation(s.items.size(), cfg.rng_seed, s.state.epoch);
  if (s.state.cursor > long(s.items.size())) s.state.cursor = 0;
}

TrainResult run_training(TrainSession& s, bool joint) {
  s.state.phase = joint ? "joint" : "ahm_only";
  AtomicFileWriter metrics((fs::path(s.cfg.out_dir) / "metrics.csv").string());
  AtomicFileWriter trace((fs::path(s.cfg.out_dir) / "controller_trace.csv").string());
  metrics.write_line("step,phase,mode,loss_ahm,loss_npr,alpha,eta_w,eta_p,lr,mlm_acc");
  trace.write_line("step,mode,loss_ema_word,loss_ema_phrase,eta_w,eta_p,alpha");

  bool use_dropout = s.cfg.model.dropout > 0.0;
  TrainResult result;
  std::vector<size_t> batch;
  long target_step = s.state.step + s.cfg.train_steps;

  while (s.state.step < target_step) {
    Mode mode;
    double alpha_used;
    if (s.cfg.masking_scheme == "ahm") {
      mode = s.controller.select_mode(s.rng_mode);
      alpha_used = s.controller.alpha();
    } else {
      mode = s.cfg.masking_scheme == "word" ? Mode::Word : Mode::Phrase;
      alpha_used = mode == Mode::Word ? 1.0 : 0.0;
    }

    next_batch(s, batch);
    s.params.zero_grads();
    BatchOutcome out;
    for (size_t idx : batch)
      ahm_sequence_pass(s, s.items[idx], mode, out, use_dropout ? &s.rng_dropout : nullptr);
    if (out.counted == 0) {
      // nothing maskable in the whole batch; skip the update entirely
      ++s.state.step;
      continue;
    }
    s.params.scale_grads(1.0 / double(out.counted));
    double loss_ahm = out.loss / double(out.counted);

    double loss_npr = 0.0;
    if (joint) loss_npr = npr_triple_pass(s, use_dropout ? &s.rng_dropout : nullptr);

    s.controller.update(mode, loss_ahm);
    adam_step(s.params, s.cfg.adam, ++s.state.adam_t);
    ++s.state.step;

    result.final_loss_ahm = loss_ahm;
    result.final_loss_npr = loss_npr;
    ++result.steps;

    if (s.cfg.log_every > 0 && (s.state.step % s.cfg.log_every == 0 || s.state.step == target_step)) {
      char row[256];
      std::snprintf(row, sizeof row, "%ld,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6g", s.state.step,
                    s.state.phase.c_str(), mode_name(mode), loss_ahm, loss_npr, alpha_used,
                    s.controller.eta_word(), s.controller.eta_phrase(), s.cfg.adam.learning_rate,
                    out.masked > 0 ? double(out.correct) / double(out.masked) : 0.0);
      metrics.write_line(row);
      std::snprintf(row, sizeof row, "%ld,%s,%.9g,%.9g,%.9g,%.9g,%.9g", s.state.step, mode_name(mode),
                    s.controller.ema_word(), s.controller.ema_phrase(), s.controller.eta_word(),
                    s.controller.eta_phrase(), alpha_used);
      trace.write_line(row);
    }

    if (s.cfg.checkpoint_every > 0 && s.state.step % s.cfg.checkpoint_every == 0 && s.state.step < target_step) {
      write_session_checkpoint(s, (fs::path(s.cfg.out_dir) / ("checkpoint-" + std::to_string(s.state.step))).string());
    }
  }

  std::string final_dir = (fs::path(s.cfg.out_dir) / "checkpoint").string();
  write_session_checkpoint(s, final_dir);
  metrics.finalize();
  trace.finalize();
  result.checkpoint_dir = final_dir;
  return result;
}

}  // namespace

TrainResult train_ahm(const TrainConfig& cfg) {
  TrainSession s;
  init_session_common(s, cfg, /*joint=*/false);
  return run_training(s, /*joint=*/false);
}

TrainResult train_joint(const TrainConfig& cfg) {
  if (cfg.init_checkpoint.empty()) throw_invalid("train_joint: init_checkpoint is required");
  if (cfg.graph_path.empty()) throw_invalid("train_joint: graph path is required");
  TrainSession s;
  init_session_common(s, cfg, /*joint=*/true);

  std::vector<std::string> product_ids;
  for (size_t i = 0; i < s.items.size(); ++i) {
    product_ids.push_back(s.items[i].seq.doc_id);
    s.item_by_product[s.items[i].seq.doc_id] = i;
  }
  AssociationGraph::LoadStats stats;
  s.graph = AssociationGraph::load(cfg.graph_path, product_ids, &stats);
  if (s.graph->edge_count() == 0) throw_data("train_joint: association graph has no usable edges");

  return run_training(s, /*joint=*/true);
}

// ---- evaluation ----

EvalResult eval_mlm(const std::string& checkpoint_dir, const std::string& products_path,
                    const std::string& reviews_path, const std::string& pool_path, Mode mode, uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_dir);
  Vocabulary vocab = Vocabulary::load((fs::path(checkpoint_dir) / "vocab.txt").string());
  PhrasePool pool;
  if (!pool_path.empty()) pool = PhrasePool::import_tsv(pool_path);
  PosTagger tagger;
  auto items = load_training_items(products_path, reviews_path, vocab, pool, tagger, ckpt.model.max_len);
  if (items.empty()) throw_data("eval_mlm: no usable sequences");

  double nll_sum = 0.0;
  long masked = 0, correct = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    // Per-sequence stream keyed by index: metrics do not depend on order.
    Rng rng(mix_seed(seed, 0xEA70 + i));
    const TrainingItem& item = items[i];
    MaskingPlan plan = mode == Mode::Word ? plan_word_mask(item.seq, rng)
                                          : plan_phrase_mask(item.seq, item.temp_pool, rng);
    if (plan.skip || plan.positions.empty()) continue;
    CorruptResult cr = corrupt(item.seq, plan, rng, vocab);
    std::vector<int64_t> positions, targets;
    for (size_t p : plan.positions) {
      positions.push_back(int64_t(p));
      targets.push_back(cr.targets[p]);
    }
    ValueGraph g(&ckpt.params);
    NodeId hidden = encode_sequence(g, cr.ids, ckpt.model);
    NodeId logits = mlm_logits(g, hidden, positions, ckpt.model);
    NodeId loss = g.cross_entropy_from_logits(logits, targets);
    nll_sum += g.value(loss)[0] * double(positions.size());
    const Tensor& z = g.value(logits);
    size_t v = z.shape()[1];
    for (size_t r = 0; r < positions.size(); ++r) {
      size_t best = 0;
      for (size_t j = 1; j < v; ++j)
        if (z[r * v + j] > z[r * v + best]) best = j;
      if (int64_t(best) == targets[r]) ++correct;
      ++masked;
    }
  }
  if (masked == 0) throw_data("eval_mlm: nothing was maskable");
  return EvalResult{nll_sum / double(masked), double(correct) / double(masked), masked};
}

// ---- attention probing ----

void probe_attention(const std::string& checkpoint_dir, const std::string& products_path, const std::string& id_a,
                     const std::string& id_b, const std::string& out_csv) {
  Checkpoint ckpt = load_checkpoint(checkpoint_dir);
  Vocabulary vocab = Vocabulary::load((fs::path(checkpoint_dir) / "vocab.txt").string());

  std::optional<ProductDoc> doc_a, doc_b;
  for (const auto& doc : read_product_corpus(products_path)) {
    if (doc.id == id_a) doc_a = doc;
    if (doc.id == id_b) doc_b = doc;
  }
  if (!doc_a) throw_data("probe-attention: product " + id_a + " not found in " + products_path);
  if (!doc_b) throw_data("probe-attention: product " + id_b + " not found in " + products_path);

  TokenSequence seq_a = make_product_sequence(*doc_a, vocab, size_t(ckpt.model.max_len));
  TokenSequence seq_b = make_product_sequence(*doc_b, vocab, size_t(ckpt.model.max_len));

  ValueGraph g(&ckpt.params);
  auto content_rows = [&](const TokenSequence& seq) {
    NodeId hidden = encode_sequence(g, seq.ids, ckpt.model);
    return g.embedding_lookup(hidden, content_positions(seq));
  };
  NodeId wa = content_rows(seq_a);
  NodeId ob = content_rows(seq_b);
  CrossAttention attn = cross_attention(g, wa, ob);
  const Tensor& a_matrix = g.value(attn.a_matrix);
  const Tensor& b_matrix = g.value(attn.b_matrix);

  // punctuation tokens can be literal commas or quotes; keep the CSV parseable
  auto sanitize = [](std::string token) {
    for (char& c : token)
      if (c == ',' || c == '"' || c == '\n') c = '_';
    return token;
  };
  std::vector<std::string> tokens_a, tokens_b;
  for (int64_t p : content_positions(seq_a)) tokens_a.push_back(sanitize(seq_a.surface[size_t(p)]));
  for (int64_t p : content_positions(seq_b)) tokens_b.push_back(sanitize(seq_b.surface[size_t(p)]));

  auto dump_matrix = [&](const char* name, const Tensor& m) {
    std::string out = name;
    for (const auto& t : tokens_b) out += "," + t;
    out += "\n";
    for (size_t i = 0; i < tokens_a.size(); ++i) {
      out += tokens_a[i];
      for (size_t j = 0; j < tokens_b.size(); ++j) out += "," + format_double(m.at(i, j));
      out += "\n";
    }
    return out;
  };
  atomic_write_file(out_csv, dump_matrix("alpha", a_matrix) + "\n" + dump_matrix("beta", b_matrix));
}

// ---- fine-tuning ----

FinetuneResult finetune_classify(const std::string& checkpoint_dir, const std::string& data_path,
                                 const std::string& out_dir, long epochs, double learning_rate, uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint_dir);
  Vocabulary vocab = Vocabulary::load((fs::path(checkpoint_dir) / "vocab.txt").string());

  struct Sample {
    std::string label;
    std::vector<int> ids;
  };
  std::vector<Sample> samples;
  std::set<std::string> label_set;
  for_each_line(data_path, [&](size_t line_no, const std::string& line) {
    if (line.empty()) return;
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw_data(data_path + ":" + std::to_string(line_no) + ": expected label<TAB>text");
    auto tokens = tokenize(fields[1]);
    if (tokens.empty()) return;
    samples.push_back({fields[0], encode(tokens, vocab, size_t(ckpt.model.max_len))});
    label_set.insert(fields[0]);
  });
  if (samples.size() < 2 || label_set.size() < 2)
    throw_data("finetune-classify: need at least two samples and two classes");

  std::vector<std::string> labels(label_set.begin(), label_set.end());
  std::unordered_map<std::string, int64_t> label_index;
  for (size_t i = 0; i < labels.size(); ++i) label_index[labels[i]] = int64_t(i);

  Rng rng(mix_seed(seed, 11));
  init_cls_head(ckpt.params, ckpt.model, int(labels.size()), rng);

  // fresh optimizer state: pre-training moments do not transfer
  for (const auto& name : ckpt.params.names()) {
    ckpt.params.entry(name).m.fill(0.0);
    ckpt.params.entry(name).v.fill(0.0);
  }

  AdamParams adam;
  adam.learning_rate = learning_rate;
  long adam_t = 0;
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t(0));

  for (long epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      const Sample& sample = samples[idx];
      ckpt.params.zero_grads();
      ValueGraph g(&ckpt.params);
      NodeId hidden = encode_sequence(g, sample.ids, ckpt.model);
      NodeId logits = cls_logits(g, hidden, int(labels.size()));
      NodeId loss = g.cross_entropy_from_logits(logits, {label_index[sample.label]});
      g.backward(loss);
      adam_step(ckpt.params, adam, ++adam_t);
    }
  }

  long correct = 0;
  for (const auto& sample : samples) {
    ValueGraph g(&ckpt.params);
    NodeId hidden = encode_sequence(g, sample.ids, ckpt.model);
    const Tensor& z = g.value(cls_logits(g, hidden, int(labels.size())));
    size_t best = 0;
    for (size_t j = 1; j < z.size(); ++j)
      if (z[j] > z[best]) best = j;
    if (int64_t(best) == label_index[sample.label]) ++correct;
  }

  FinetuneResult result;
  result.train_accuracy = double(correct) / double(samples.size());
  result.classes = long(labels.size());
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    TrainerState state = ckpt.state;
    state.phase = "finetune_cls";
    std::string dir = (fs::path(out_dir) / "checkpoint").string();
    save_checkpoint(dir, ckpt.model, ckpt.params, nullptr, state, /*save_moments=*/false, labels);
    vocab.save((fs::path(dir) / "vocab.txt").string());
    result.checkpoint_dir = dir;
  }
  return result;
}

}  // namespace ebert
