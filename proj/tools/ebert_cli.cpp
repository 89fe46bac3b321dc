// Command-line front end for the pre-training pipeline. Links only the
// public C API in ebert.h.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ebert.h"

namespace {

int fail(ebert_status status) {
  std::cerr << "error: " << ebert_last_error() << "\n";
  (void)status;
  return 2;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string products, reviews, vocab, pool, graph, out, init, scheme;
  long steps = -1;
  long seed = -1;

  std::vector<std::string> overrides() const {
    std::vector<std::string> out_overrides = sets;
    auto put = [&](const char* key, const std::string& value) {
      if (!value.empty()) out_overrides.push_back(std::string(key) + "=" + value);
    };
    put("products", products);
    put("reviews", reviews);
    put("vocab", vocab);
    put("phrase_pool", pool);
    put("graph", graph);
    put("out_dir", out);
    put("init_checkpoint", init);
    put("masking_scheme", scheme);
    if (steps >= 0) out_overrides.push_back("train_steps=" + std::to_string(steps));
    if (seed >= 0) out_overrides.push_back("rng_seed=" + std::to_string(seed));
    return out_overrides;
  }
};

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config, "key = value config file");
  cmd->add_option("--set", args.sets, "override, key=value (repeatable; flags win over the file)");
  cmd->add_option("--products", args.products, "product corpus TSV");
  cmd->add_option("--reviews", args.reviews, "review corpus TSV");
  cmd->add_option("--vocab", args.vocab, "vocabulary file");
  cmd->add_option("--pool", args.pool, "phrase pool TSV");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--init", args.init, "checkpoint to resume or initialize from");
  cmd->add_option("--scheme", args.scheme, "masking scheme: ahm | word | phrase");
  cmd->add_option("--steps", args.steps, "training steps for this run");
  cmd->add_option("--seed", args.seed, "RNG seed");
}

int run_train(const TrainArgs& args, bool joint) {
  auto overrides = args.overrides();
  std::vector<const char*> ptrs;
  for (const auto& o : overrides) ptrs.push_back(o.c_str());
  char* ckpt = nullptr;
  ebert_status status =
      joint ? ebert_train_joint(args.config.empty() ? nullptr : args.config.c_str(), ptrs.data(),
                                int(ptrs.size()), &ckpt)
            : ebert_train_ahm(args.config.empty() ? nullptr : args.config.c_str(), ptrs.data(), int(ptrs.size()),
                              &ckpt);
  if (status != EBERT_OK) return fail(status);
  std::cout << "checkpoint: " << ckpt << "\n";
  ebert_string_free(ckpt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"e-commerce pre-training pipeline (adaptive hybrid masking + neighbor product reconstruction)"};
  app.require_subcommand(1);

  int exit_code = 0;
  auto run = [&](std::function<int()> fn) { exit_code = fn(); };

  // build-vocab
  {
    auto* cmd = app.add_subcommand("build-vocab", "build a vocabulary from the corpora");
    auto products = std::make_shared<std::string>();
    auto reviews = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto min_freq = std::make_shared<long>(1);
    auto max_size = std::make_shared<long>(8192);
    cmd->add_option("--products", *products, "product corpus TSV");
    cmd->add_option("--reviews", *reviews, "review corpus TSV");
    cmd->add_option("--out", *out, "vocabulary output path")->required();
    cmd->add_option("--min-freq", *min_freq, "minimum token count");
    cmd->add_option("--max-size", *max_size, "maximum vocabulary size incl. specials");
    cmd->callback([=, &run] {
      run([=] {
        long size = 0;
        ebert_status status = ebert_build_vocab(products->empty() ? nullptr : products->c_str(),
                                                reviews->empty() ? nullptr : reviews->c_str(), *min_freq,
                                                *max_size, out->c_str(), &size);
        if (status != EBERT_OK) return fail(status);
        std::cout << "vocabulary size: " << size << "\n";
        return 0;
      });
    });
  }

  // mine-phrases
  {
    auto* cmd = app.add_subcommand("mine-phrases", "mine and score candidate phrases from the corpora");
    auto products = std::make_shared<std::string>();
    auto reviews = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto max_len = std::make_shared<long>(6);
    auto min_count = std::make_shared<long>(3);
    auto filter = std::make_shared<double>(0.5);
    auto no_filter = std::make_shared<bool>(false);
    cmd->add_option("--products", *products, "product corpus TSV");
    cmd->add_option("--reviews", *reviews, "review corpus TSV");
    cmd->add_option("--out", *out, "pool output TSV")->required();
    cmd->add_option("--max-len", *max_len, "longest phrase in tokens (2..6)");
    cmd->add_option("--min-count", *min_count, "minimum phrase count (>= 2)");
    cmd->add_option("--filter", *filter, "drop phrases scoring below this (default 0.5)");
    cmd->add_flag("--no-filter", *no_filter, "keep every scored candidate");
    cmd->callback([=, &run] {
      run([=] {
        long size = 0;
        ebert_status status = ebert_mine_phrases(products->empty() ? nullptr : products->c_str(),
                                                 reviews->empty() ? nullptr : reviews->c_str(), *max_len,
                                                 *min_count, *no_filter ? -1.0 : *filter, out->c_str(), &size);
        if (status != EBERT_OK) return fail(status);
        std::cout << "pool size: " << size << "\n";
        return 0;
      });
    });
  }

  // import-phrases
  {
    auto* cmd = app.add_subcommand("import-phrases", "import an externally mined phrase pool");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto filter = std::make_shared<double>(-1.0);
    cmd->add_option("--in", *in, "pool TSV: phrase<TAB>score")->required();
    cmd->add_option("--out", *out, "normalized pool output TSV")->required();
    cmd->add_option("--filter", *filter, "apply the score >= threshold filter");
    cmd->callback([=, &run] {
      run([=] {
        long size = 0, skipped = 0;
        ebert_status status = ebert_import_phrases(in->c_str(), *filter, out->c_str(), &size, &skipped);
        if (status != EBERT_OK) return fail(status);
        std::cout << "pool size: " << size << "\nskipped (length outside 2..6): " << skipped << "\n";
        return 0;
      });
    });
  }

  // match
  {
    auto* cmd = app.add_subcommand("match", "match pool phrases in text, leftmost-longest");
    auto pool_path = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    cmd->add_option("--pool", *pool_path, "phrase pool TSV")->required();
    cmd->add_option("--input", *input, "text file, one document per line (default: stdin)");
    cmd->callback([=, &run] {
      run([=] {
        ebert_pool* pool = nullptr;
        ebert_status status = ebert_pool_open(pool_path->c_str(), &pool);
        if (status != EBERT_OK) return fail(status);
        std::ifstream file;
        std::istream* in_stream = &std::cin;
        if (!input->empty()) {
          file.open(*input);
          if (!file) {
            std::cerr << "error: cannot open " << *input << "\n";
            ebert_pool_close(pool);
            return 2;
          }
          in_stream = &file;
        }
        std::string line;
        long line_no = 0;
        while (std::getline(*in_stream, line)) {
          ++line_no;
          char* matches = nullptr;
          status = ebert_pool_match(pool, line.c_str(), &matches);
          if (status != EBERT_OK) {
            ebert_pool_close(pool);
            return fail(status);
          }
          std::istringstream rows(matches);
          std::string row;
          while (std::getline(rows, row)) std::cout << line_no << "\t" << row << "\n";
          ebert_string_free(matches);
        }
        ebert_pool_close(pool);
        return 0;
      });
    });
  }

  // overlap
  {
    auto* cmd = app.add_subcommand("overlap", "overlap ratio between domain phrases and noun phrases");
    auto domain = std::make_shared<std::string>();
    auto noun = std::make_shared<std::string>();
    auto category = std::make_shared<std::string>("all");
    auto out = std::make_shared<std::string>();
    cmd->add_option("--domain", *domain, "domain pool TSV")->required();
    cmd->add_option("--noun", *noun, "noun phrase list")->required();
    cmd->add_option("--category", *category, "category label for the report row");
    cmd->add_option("--out", *out, "append-style CSV report (category,overlap_ratio)");
    cmd->callback([=, &run] {
      run([=] {
        double ratio = 0.0;
        ebert_status status = ebert_phrase_overlap(domain->c_str(), noun->c_str(), &ratio);
        if (status != EBERT_OK) return fail(status);
        std::printf("overlap_ratio: %.6f\n", ratio);
        if (!out->empty()) {
          std::ofstream report(*out, std::ios::trunc);
          report << "category,overlap_ratio\n" << *category << "," << ratio << "\n";
        }
        return 0;
      });
    });
  }

  // build-graph
  {
    auto* cmd = app.add_subcommand("build-graph", "load and validate the product association graph");
    auto edges = std::make_shared<std::string>();
    auto products = std::make_shared<std::string>();
    cmd->add_option("--edges", *edges, "edge list TSV")->required();
    cmd->add_option("--products", *products, "product corpus TSV")->required();
    cmd->callback([=, &run] {
      run([=] {
        ebert_graph* graph = nullptr;
        ebert_status status = ebert_graph_load(edges->c_str(), products->c_str(), &graph);
        if (status != EBERT_OK) return fail(status);
        std::cout << "nodes: " << ebert_graph_nodes(graph) << "\nedges: " << ebert_graph_edges(graph)
                  << "\ndropped: " << ebert_graph_dropped(graph) << "\n";
        ebert_graph_close(graph);
        return 0;
      });
    });
  }

  // pretrain / pretrain-joint
  {
    auto args = std::make_shared<TrainArgs>();
    auto* cmd = app.add_subcommand("pretrain", "phase 1: adaptive hybrid masking on the full corpus");
    add_train_flags(cmd, *args);
    cmd->callback([=, &run] { run([=] { return run_train(*args, false); }); });
  }
  {
    auto args = std::make_shared<TrainArgs>();
    auto* cmd = app.add_subcommand("pretrain-joint",
                                   "phase 2: AHM + neighbor product reconstruction on the product corpus");
    add_train_flags(cmd, *args);
    cmd->add_option("--graph", args->graph, "association graph edge TSV");
    cmd->callback([=, &run] { run([=] { return run_train(*args, true); }); });
  }

  // eval-mlm
  {
    auto* cmd = app.add_subcommand("eval-mlm", "masked-token loss and accuracy of a checkpoint");
    auto ckpt = std::make_shared<std::string>();
    auto products = std::make_shared<std::string>();
    auto reviews = std::make_shared<std::string>();
    auto pool_path = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("word");
    auto seed = std::make_shared<long>(1234);
    cmd->add_option("--ckpt", *ckpt, "checkpoint directory")->required();
    cmd->add_option("--products", *products, "held-out product corpus TSV");
    cmd->add_option("--reviews", *reviews, "held-out review corpus TSV");
    cmd->add_option("--pool", *pool_path, "phrase pool TSV (required for phrase mode)");
    cmd->add_option("--mode", *mode, "word | phrase");
    cmd->add_option("--seed", *seed, "evaluation seed");
    cmd->callback([=, &run] {
      run([=] {
        double loss = 0.0, acc = 0.0;
        long masked = 0;
        ebert_status status = ebert_eval_mlm(ckpt->c_str(), products->empty() ? nullptr : products->c_str(),
                                             reviews->empty() ? nullptr : reviews->c_str(),
                                             pool_path->empty() ? nullptr : pool_path->c_str(), mode->c_str(),
                                             uint64_t(*seed), &loss, &acc, &masked);
        if (status != EBERT_OK) return fail(status);
        std::printf("mode: %s\nmasked_tokens: %ld\nloss: %.6f\naccuracy: %.6f\n", mode->c_str(), masked, loss,
                    acc);
        return 0;
      });
    });
  }

  // probe-attention
  {
    auto* cmd = app.add_subcommand("probe-attention", "dump cross-attention matrices for a product pair");
    auto ckpt = std::make_shared<std::string>();
    auto products = std::make_shared<std::string>();
    auto pair = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--ckpt", *ckpt, "checkpoint directory")->required();
    cmd->add_option("--products", *products, "product corpus TSV")->required();
    cmd->add_option("--pair", *pair, "two product ids, comma separated: a,b")->required();
    cmd->add_option("--out", *out, "output CSV")->required();
    cmd->callback([=, &run] {
      run([=] {
        auto comma = pair->find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 == pair->size()) {
          std::cerr << "error: --pair expects two comma separated product ids\n";
          return 1;
        }
        std::string a = pair->substr(0, comma);
        std::string b = pair->substr(comma + 1);
        ebert_status status =
            ebert_probe_attention(ckpt->c_str(), products->c_str(), a.c_str(), b.c_str(), out->c_str());
        if (status != EBERT_OK) return fail(status);
        std::cout << "wrote " << *out << "\n";
        return 0;
      });
    });
  }

  // finetune-classify
  {
    auto* cmd = app.add_subcommand("finetune-classify", "fine-tune the [CLS] head on labeled text");
    auto ckpt = std::make_shared<std::string>();
    auto data = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto epochs = std::make_shared<long>(4);
    auto lr = std::make_shared<double>(2e-3);
    auto seed = std::make_shared<long>(42);
    cmd->add_option("--ckpt", *ckpt, "pre-trained checkpoint directory")->required();
    cmd->add_option("--data", *data, "labeled TSV: label<TAB>text")->required();
    cmd->add_option("--out", *out, "output directory for the fine-tuned checkpoint");
    cmd->add_option("--epochs", *epochs, "fine-tuning epochs");
    cmd->add_option("--lr", *lr, "learning rate");
    cmd->add_option("--seed", *seed, "RNG seed");
    cmd->callback([=, &run] {
      run([=] {
        double acc = 0.0;
        long classes = 0;
        ebert_status status = ebert_finetune_classify(ckpt->c_str(), data->c_str(),
                                                      out->empty() ? nullptr : out->c_str(), *epochs, *lr,
                                                      uint64_t(*seed), &acc, &classes);
        if (status != EBERT_OK) return fail(status);
        std::printf("classes: %ld\ntrain_accuracy: %.6f\n", classes, acc);
        return 0;
      });
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return exit_code;
}
