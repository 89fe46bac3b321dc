#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "util.hpp"

namespace ebert {

/// Coarse tag set, just enough to drive the noun-phrase chunker.
enum class PosTag { Noun, Adj, Verb, Adv, Det, Adp, Pron, Num, Punct, Other };

const char* pos_tag_name(PosTag tag);
PosTag parse_pos_tag(const std::string& name);

/// Lowercases, strips <...> tag runs, splits punctuation into its own tokens.
/// Deterministic; empty text yields an empty vector.
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  Vocabulary();

  /// Tokens with count >= min_freq ranked by (count desc, token asc),
  /// truncated to max_size - 5 and placed after the specials.
  static Vocabulary build(const std::unordered_map<std::string, long>& counts, long min_freq, size_t max_size);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  size_t size() const { return id_to_token_.size(); }
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// A numericalized document: the model's input sequence. Surface forms (and
/// POS tags when present) stay aligned with the ids, specials included.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> surface;
  std::vector<PosTag> pos;  // empty until tagged
  std::string doc_id;

  size_t length() const { return ids.size(); }
  bool has_pos() const { return !pos.empty(); }
};

/// [CLS] + ids + [SEP], truncated to max_len with the [SEP] kept.
std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, size_t max_len);
/// Inverse of encode for in-vocabulary tokens (specials dropped).
std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab);

TokenSequence make_sequence(const std::vector<std::string>& tokens, const Vocabulary& vocab, size_t max_len,
                            std::string doc_id);

/// Most-frequent-tag lexicon plus suffix fallbacks, defaulting to NOUN.
/// Entries can be overridden or extended from a token<TAB>TAG file.
class PosTagger {
 public:
  PosTagger();
  void load_lexicon(const std::string& path);
  PosTag tag(const std::string& token) const;
  void tag_sequence(TokenSequence& seq) const;

 private:
  std::unordered_map<std::string, PosTag> lexicon_;
};

struct ProductDoc {
  std::string id;
  std::vector<std::string> title;
  std::vector<std::string> description;

  /// Pre-training input: title [SEP] description as one token stream, with
  /// the separator inserted by make_product_sequence.
  std::vector<std::string> content() const;
};

struct ReviewDoc {
  std::string id;
  std::string product_id;
  std::vector<std::string> body;
};

struct CorpusStats {
  size_t kept = 0;
  size_t skipped_empty = 0;
};

/// TSV: product_id<TAB>title<TAB>description. Lines that tokenize to zero
/// tokens are skipped and counted, not an error.
std::vector<ProductDoc> read_product_corpus(const std::string& path, CorpusStats* stats = nullptr);
/// TSV: review_id<TAB>product_id<TAB>text.
std::vector<ReviewDoc> read_review_corpus(const std::string& path, CorpusStats* stats = nullptr);

TokenSequence make_product_sequence(const ProductDoc& doc, const Vocabulary& vocab, size_t max_len);
TokenSequence make_review_sequence(const ReviewDoc& doc, const Vocabulary& vocab, size_t max_len);

/// Streams token counts from product/review corpora (either path may be
/// empty) for vocabulary construction.
std::unordered_map<std::string, long> count_corpus_tokens(const std::string& products_path,
                                                          const std::string& reviews_path);

}  // namespace ebert
