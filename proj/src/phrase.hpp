#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "text.hpp"
#include "util.hpp"

namespace ebert {

constexpr size_t kMinPhraseTokens = 2;
constexpr size_t kMaxPhraseTokens = 6;

struct PhraseEntry {
  std::vector<std::string> tokens;  // 2..6 words
  double score;                     // in [0,1]
};

/// Corpus-wide inventory of scored domain phrases. Immutable in spirit:
/// mutations (insert, filter) keep the cached minimum score consistent.
class PhrasePool {
 public:
  void insert(std::vector<std::string> tokens, double score);
  bool contains(const std::vector<std::string>& tokens) const;
  double score_of(const std::vector<std::string>& tokens) const;
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Minimum score over all entries; supplements inherit this value.
  double min_score() const;
  const std::vector<PhraseEntry>& entries() const { return entries_; }

  /// Retains entries with score >= threshold.
  PhrasePool filtered(double threshold) const;

  /// TSV `phrase tokens<TAB>score`. Scores outside [0,1] are an error;
  /// phrases outside the 2..6 token range are skipped and counted.
  static PhrasePool import_tsv(const std::string& path, size_t* skipped = nullptr);
  void save_tsv(const std::string& path) const;

  /// Longest phrase starting with `first`, matching at tokens[pos..]. Used by
  /// the leftmost-longest matcher. Returns match length in tokens, 0 if none.
  size_t longest_match_at(const std::vector<std::string>& tokens, size_t pos) const;
  double score_at(const std::vector<std::string>& tokens, size_t pos, size_t len) const;

 private:
  std::vector<PhraseEntry> entries_;
  std::unordered_map<std::string, size_t> by_key_;                  // joined tokens -> entry index
  std::unordered_map<std::string, std::vector<size_t>> by_first_;   // first token -> entries, longest first
  mutable double min_score_ = 1.0;
  mutable bool min_dirty_ = false;

  void reindex_first(const std::string& first);
};

struct CorpusSource {
  std::string path;
  bool is_review = false;
};

/// Candidate n-grams (2..max_len tokens) with count >= min_count, scored with
/// sigmoid(0.3*log(count) + 2.0*npmi + 1.0*completeness) where npmi is the
/// normalized PMI of the best binary split and completeness compares the
/// phrase count against its most frequent one-token extension.
PhrasePool mine_phrases(const std::vector<CorpusSource>& sources, size_t max_len, long min_count);

/// One matched or supplemental phrase occurrence inside a sequence,
/// half-open token interval [begin, end).
struct PhraseSpan {
  size_t begin = 0;
  size_t end = 0;
  double score = 0.0;
  enum class Origin { Domain, NounSupplement } origin = Origin::Domain;

  size_t size() const { return end - begin; }
  bool intersects(const PhraseSpan& other) const { return begin < other.end && other.begin < end; }
};

/// Leftmost-longest non-overlapping exact matches of pool phrases.
std::vector<PhraseSpan> match_phrases(const std::vector<std::string>& tokens, const PhrasePool& pool);

/// Maximal (ADJ)*(NOUN)+ spans of length >= 2. Requires POS tags.
std::vector<PhraseSpan> chunk_noun_phrases(const TokenSequence& seq);

/// The per-sequence temporary pool: matched domain spans plus noun spans
/// that intersect none of them. Supplements carry the pool minimum score.
struct TempPool {
  std::vector<PhraseSpan> spans;  // sorted by begin, pairwise disjoint

  bool empty() const { return spans.empty(); }
};

TempPool build_temp_pool(const TokenSequence& seq, const PhrasePool& domain_pool);

/// |domain intersect noun| / |domain| over phrase token tuples.
double phrase_overlap(const PhrasePool& domain, const std::vector<std::vector<std::string>>& noun_phrases);

/// Loads a phrase-per-line file (score column optional) as raw token tuples.
std::vector<std::vector<std::string>> load_phrase_list(const std::string& path);

}  // namespace ebert
