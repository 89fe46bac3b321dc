#include "ebert.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "assoc_graph.hpp"
#include "config.hpp"
#include "phrase.hpp"
#include "text.hpp"
#include "trainer.hpp"
#include "util.hpp"

using namespace ebert;

namespace {

thread_local std::string g_last_error;

ebert_status status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidArgument: return EBERT_E_INVALID;
    case ErrorKind::Io: return EBERT_E_IO;
    case ErrorKind::Data: return EBERT_E_DATA;
    case ErrorKind::Numeric: return EBERT_E_NUMERIC;
    case ErrorKind::Internal: return EBERT_E_INTERNAL;
  }
  return EBERT_E_INTERNAL;
}

template <typename Fn>
ebert_status guarded(Fn&& fn) {
  try {
    fn();
    return EBERT_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EBERT_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EBERT_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

TrainConfig config_from(const char* config_path, const char* const* overrides, int n_overrides) {
  Config cfg;
  if (config_path && *config_path) cfg = Config::load(config_path);
  std::vector<std::string> extra;
  for (int i = 0; i < n_overrides; ++i) {
    if (!overrides[i]) throw_invalid("override " + std::to_string(i) + " is null");
    extra.emplace_back(overrides[i]);
  }
  cfg.apply_overrides(extra);
  return TrainConfig::from_config(cfg);
}

Mode parse_mode(const char* mode) {
  std::string m = opt(mode);
  if (m == "word") return Mode::Word;
  if (m == "phrase") return Mode::Phrase;
  throw_invalid("mode must be 'word' or 'phrase', got '" + m + "'");
}

}  // namespace

struct ebert_pool {
  PhrasePool pool;
};

struct ebert_graph {
  AssociationGraph graph;
  AssociationGraph::LoadStats stats;
};

extern "C" {

const char* ebert_version(void) { return "0.1.0"; }

const char* ebert_last_error(void) { return g_last_error.c_str(); }

void ebert_string_free(char* s) { std::free(s); }

ebert_status ebert_build_vocab(const char* products_tsv, const char* reviews_tsv, long min_freq, long max_size,
                               const char* out_path, long* out_size) {
  return guarded([&] {
    if (!out_path) throw_invalid("out_path is required");
    auto counts = count_corpus_tokens(opt(products_tsv), opt(reviews_tsv));
    Vocabulary vocab = Vocabulary::build(counts, min_freq, size_t(max_size));
    vocab.save(out_path);
    if (out_size) *out_size = long(vocab.size());
  });
}

ebert_status ebert_mine_phrases(const char* products_tsv, const char* reviews_tsv, long max_len, long min_count,
                                double filter_threshold, const char* out_path, long* out_size) {
  return guarded([&] {
    if (!out_path) throw_invalid("out_path is required");
    std::vector<CorpusSource> sources;
    if (products_tsv && *products_tsv) sources.push_back({products_tsv, false});
    if (reviews_tsv && *reviews_tsv) sources.push_back({reviews_tsv, true});
    if (sources.empty()) throw_invalid("at least one corpus is required");
    PhrasePool pool = mine_phrases(sources, size_t(max_len), min_count);
    if (filter_threshold >= 0.0) pool = pool.filtered(filter_threshold);
    pool.save_tsv(out_path);
    if (out_size) *out_size = long(pool.size());
  });
}

ebert_status ebert_import_phrases(const char* in_tsv, double filter_threshold, const char* out_path,
                                  long* out_size, long* out_skipped) {
  return guarded([&] {
    if (!in_tsv || !out_path) throw_invalid("in_tsv and out_path are required");
    size_t skipped = 0;
    PhrasePool pool = PhrasePool::import_tsv(in_tsv, &skipped);
    if (filter_threshold >= 0.0) pool = pool.filtered(filter_threshold);
    pool.save_tsv(out_path);
    if (out_size) *out_size = long(pool.size());
    if (out_skipped) *out_skipped = long(skipped);
  });
}

ebert_status ebert_pool_open(const char* pool_tsv, ebert_pool** out) {
  return guarded([&] {
    if (!pool_tsv || !out) throw_invalid("pool_tsv and out are required");
    auto* handle = new ebert_pool{PhrasePool::import_tsv(pool_tsv)};
    *out = handle;
  });
}

void ebert_pool_close(ebert_pool* pool) { delete pool; }

long ebert_pool_size(const ebert_pool* pool) { return pool ? long(pool->pool.size()) : 0; }

double ebert_pool_min_score(const ebert_pool* pool) { return pool ? pool->pool.min_score() : 0.0; }

ebert_status ebert_pool_match(const ebert_pool* pool, const char* text, char** out) {
  return guarded([&] {
    if (!pool || !text || !out) throw_invalid("pool, text and out are required");
    auto tokens = tokenize(text);
    auto spans = match_phrases(tokens, pool->pool);
    std::string result;
    char score[32];
    for (const auto& span : spans) {
      std::vector<std::string> phrase(tokens.begin() + long(span.begin), tokens.begin() + long(span.end));
      std::snprintf(score, sizeof score, "%.6g", span.score);
      result += std::to_string(span.begin) + "\t" + std::to_string(span.end) + "\t" + join(phrase, " ") + "\t" +
                score + "\n";
    }
    *out = dup_string(result);
  });
}

ebert_status ebert_phrase_overlap(const char* domain_tsv, const char* noun_tsv, double* out_ratio) {
  return guarded([&] {
    if (!domain_tsv || !noun_tsv || !out_ratio) throw_invalid("domain_tsv, noun_tsv and out_ratio are required");
    PhrasePool domain = PhrasePool::import_tsv(domain_tsv);
    auto noun = load_phrase_list(noun_tsv);
    *out_ratio = phrase_overlap(domain, noun);
  });
}

ebert_status ebert_graph_load(const char* edges_tsv, const char* products_tsv, ebert_graph** out) {
  return guarded([&] {
    if (!edges_tsv || !products_tsv || !out) throw_invalid("edges_tsv, products_tsv and out are required");
    std::vector<std::string> ids;
    for (const auto& doc : read_product_corpus(products_tsv)) ids.push_back(doc.id);
    auto* handle = new ebert_graph;
    handle->graph = AssociationGraph::load(edges_tsv, ids, &handle->stats);
    *out = handle;
  });
}

void ebert_graph_close(ebert_graph* graph) { delete graph; }

long ebert_graph_nodes(const ebert_graph* graph) { return graph ? long(graph->graph.node_count()) : 0; }

long ebert_graph_edges(const ebert_graph* graph) { return graph ? long(graph->graph.edge_count()) : 0; }

long ebert_graph_dropped(const ebert_graph* graph) {
  if (!graph) return 0;
  return long(graph->stats.dropped_unknown + graph->stats.dropped_self_loops + graph->stats.dropped_duplicates);
}

ebert_status ebert_train_ahm(const char* config_path, const char* const* overrides, int n_overrides,
                             char** out_checkpoint_dir) {
  return guarded([&] {
    TrainResult result = train_ahm(config_from(config_path, overrides, n_overrides));
    if (out_checkpoint_dir) *out_checkpoint_dir = dup_string(result.checkpoint_dir);
  });
}

ebert_status ebert_train_joint(const char* config_path, const char* const* overrides, int n_overrides,
                               char** out_checkpoint_dir) {
  return guarded([&] {
    TrainResult result = train_joint(config_from(config_path, overrides, n_overrides));
    if (out_checkpoint_dir) *out_checkpoint_dir = dup_string(result.checkpoint_dir);
  });
}

ebert_status ebert_eval_mlm(const char* checkpoint_dir, const char* products_tsv, const char* reviews_tsv,
                            const char* pool_tsv, const char* mode, uint64_t seed, double* out_loss,
                            double* out_accuracy, long* out_masked_tokens) {
  return guarded([&] {
    if (!checkpoint_dir) throw_invalid("checkpoint_dir is required");
    EvalResult result =
        eval_mlm(checkpoint_dir, opt(products_tsv), opt(reviews_tsv), opt(pool_tsv), parse_mode(mode), seed);
    if (out_loss) *out_loss = result.loss;
    if (out_accuracy) *out_accuracy = result.accuracy;
    if (out_masked_tokens) *out_masked_tokens = result.masked_tokens;
  });
}

ebert_status ebert_probe_attention(const char* checkpoint_dir, const char* products_tsv, const char* product_a,
                                   const char* product_b, const char* out_csv) {
  return guarded([&] {
    if (!checkpoint_dir || !products_tsv || !product_a || !product_b || !out_csv)
      throw_invalid("checkpoint_dir, products_tsv, product_a, product_b and out_csv are required");
    probe_attention(checkpoint_dir, products_tsv, product_a, product_b, out_csv);
  });
}

ebert_status ebert_finetune_classify(const char* checkpoint_dir, const char* labeled_tsv, const char* out_dir,
                                     long epochs, double learning_rate, uint64_t seed,
                                     double* out_train_accuracy, long* out_classes) {
  return guarded([&] {
    if (!checkpoint_dir || !labeled_tsv) throw_invalid("checkpoint_dir and labeled_tsv are required");
    FinetuneResult result = finetune_classify(checkpoint_dir, labeled_tsv, opt(out_dir), epochs, learning_rate, seed);
    if (out_train_accuracy) *out_train_accuracy = result.train_accuracy;
    if (out_classes) *out_classes = result.classes;
  });
}

}  // extern "C"
