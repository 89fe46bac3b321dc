#include "phrase.hpp"

#include <algorithm>
#include <cmath>

namespace ebert {

namespace {

// Scorer coefficients: count weight, npmi weight, completeness weight.
constexpr double kCountCoef = 0.3;
constexpr double kNpmiCoef = 2.0;
constexpr double kCompletenessCoef = 1.0;

std::string key_of(const std::vector<std::string>& tokens) { return join(tokens, " "); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void PhrasePool::insert(std::vector<std::string> tokens, double score) {
  if (tokens.size() < kMinPhraseTokens || tokens.size() > kMaxPhraseTokens)
    throw_invalid("phrase pool: phrase length " + std::to_string(tokens.size()) + " outside [2,6]");
  if (!(score >= 0.0 && score <= 1.0))
    throw_invalid("phrase pool: score " + format_double(score) + " outside [0,1]");
  std::string key = key_of(tokens);
  auto it = by_key_.find(key);
  if (it != by_key_.end()) {
    entries_[it->second].score = score;
    min_dirty_ = true;
    return;
  }
  by_key_.emplace(std::move(key), entries_.size());
  entries_.push_back(PhraseEntry{std::move(tokens), score});
  const std::string& first = entries_.back().tokens.front();
  by_first_[first].push_back(entries_.size() - 1);
  reindex_first(first);
  min_dirty_ = true;
}

void PhrasePool::reindex_first(const std::string& first) {
  auto& v = by_first_[first];
  std::sort(v.begin(), v.end(), [&](size_t a, size_t b) {
    if (entries_[a].tokens.size() != entries_[b].tokens.size())
      return entries_[a].tokens.size() > entries_[b].tokens.size();
    return a < b;
  });
}

bool PhrasePool::contains(const std::vector<std::string>& tokens) const {
  return by_key_.count(key_of(tokens)) != 0;
}

double PhrasePool::score_of(const std::vector<std::string>& tokens) const {
  auto it = by_key_.find(key_of(tokens));
  if (it == by_key_.end()) throw_invalid("phrase pool: phrase not present: " + key_of(tokens));
  return entries_[it->second].score;
}

double PhrasePool::min_score() const {
  if (min_dirty_) {
    min_score_ = 1.0;
    for (const auto& e : entries_) min_score_ = std::min(min_score_, e.score);
    min_dirty_ = false;
  }
  return min_score_;
}

PhrasePool PhrasePool::filtered(double threshold) const {
  PhrasePool out;
  for (const auto& e : entries_)
    if (e.score >= threshold) out.insert(e.tokens, e.score);
  return out;
}

PhrasePool PhrasePool::import_tsv(const std::string& path, size_t* skipped) {
  PhrasePool pool;
  size_t skipped_len = 0;
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    if (line.empty() || line[0] == '#') return;
    auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw_data(path + ":" + std::to_string(line_no) + ": expected phrase<TAB>score");
    double score = parse_double(fields[1], path + ":" + std::to_string(line_no));
    if (!(score >= 0.0 && score <= 1.0))
      throw_data(path + ":" + std::to_string(line_no) + ": score " + fields[1] + " outside [0,1]");
    auto tokens = split(fields[0], ' ');
    tokens.erase(std::remove_if(tokens.begin(), tokens.end(), [](const std::string& t) { return t.empty(); }),
                 tokens.end());
    if (tokens.size() < kMinPhraseTokens || tokens.size() > kMaxPhraseTokens) {
      ++skipped_len;
      return;
    }
    pool.insert(std::move(tokens), score);
  });
  if (skipped) *skipped = skipped_len;
  return pool;
}

void PhrasePool::save_tsv(const std::string& path) const {
  std::string content;
  for (const auto& e : entries_) {
    content += join(e.tokens, " ");
    content += '\t';
    content += format_double(e.score);
    content += '\n';
  }
  atomic_write_file(path, content);
}

size_t PhrasePool::longest_match_at(const std::vector<std::string>& tokens, size_t pos) const {
  auto it = by_first_.find(tokens[pos]);
  if (it == by_first_.end()) return 0;
  for (size_t idx : it->second) {  // longest first
    const auto& phrase = entries_[idx].tokens;
    if (pos + phrase.size() > tokens.size()) continue;
    bool match = true;
    for (size_t j = 1; j < phrase.size(); ++j) {
      if (tokens[pos + j] != phrase[j]) {
        match = false;
        break;
      }
    }
    if (match) return phrase.size();
  }
  return 0;
}

double PhrasePool::score_at(const std::vector<std::string>& tokens, size_t pos, size_t len) const {
  std::vector<std::string> phrase(tokens.begin() + long(pos), tokens.begin() + long(pos + len));
  return score_of(phrase);
}

// ---- mining ----

PhrasePool mine_phrases(const std::vector<CorpusSource>& sources, size_t max_len, long min_count) {
  if (min_count < 2) throw_invalid("mine_phrases: min_count must be >= 2");
  if (max_len < kMinPhraseTokens || max_len > kMaxPhraseTokens)
    throw_invalid("mine_phrases: max_len must be in [2,6]");

  // n-gram counts for n = 1..max_len+1; the +1 length only feeds the
  // completeness denominator.
  std::unordered_map<std::string, long> counts;
  long total_tokens = 0;

  auto absorb = [&](const std::vector<std::string>& tokens) {
    total_tokens += long(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
      std::string gram = tokens[i];
      ++counts[gram];
      for (size_t n = 2; n <= max_len + 1 && i + n <= tokens.size(); ++n) {
        gram += ' ';
        gram += tokens[i + n - 1];
        ++counts[gram];
      }
    }
  };

  for (const auto& src : sources) {
    if (src.is_review) {
      for (const auto& doc : read_review_corpus(src.path)) absorb(doc.body);
    } else {
      for (const auto& doc : read_product_corpus(src.path)) {
        absorb(doc.title);
        absorb(doc.description);
      }
    }
  }
  if (total_tokens == 0) return PhrasePool{};

  auto count_of = [&](const std::string& gram) {
    auto it = counts.find(gram);
    return it == counts.end() ? 0L : it->second;
  };
  auto prob = [&](long c) { return double(c) / double(total_tokens); };

  // Most frequent one-token extension per contained (n-1)-gram; feeds the
  // completeness denominator.
  std::unordered_map<std::string, long> max_extension;
  for (const auto& [gram, count] : counts) {
    auto tokens = split(gram, ' ');
    if (tokens.size() < kMinPhraseTokens + 1) continue;
    std::string prefix = join({tokens.begin(), tokens.end() - 1}, " ");
    std::string suffix = join({tokens.begin() + 1, tokens.end()}, " ");
    auto bump = [&](const std::string& inner) {
      long& slot = max_extension[inner];
      slot = std::max(slot, count);
    };
    bump(prefix);
    bump(suffix);
  }

  PhrasePool scored;
  for (const auto& [gram, count] : counts) {
    if (count < min_count) continue;
    auto tokens = split(gram, ' ');
    if (tokens.size() < kMinPhraseTokens || tokens.size() > max_len) continue;

    double best_npmi = -1.0;
    for (size_t cut = 1; cut < tokens.size(); ++cut) {
      std::string left = join({tokens.begin(), tokens.begin() + long(cut)}, " ");
      std::string right = join({tokens.begin() + long(cut), tokens.end()}, " ");
      long cl = count_of(left), cr = count_of(right);
      if (cl == 0 || cr == 0) continue;
      double pmi = std::log(prob(count) / (prob(cl) * prob(cr)));
      double denom = std::max(-std::log(prob(count)), 1e-12);
      best_npmi = std::max(best_npmi, pmi / denom);
    }

    auto ext = max_extension.find(gram);
    long ext_count = ext == max_extension.end() ? 0 : ext->second;
    double completeness = double(count) / double(std::max(ext_count, 1L));

    double z = kCountCoef * std::log(double(count)) + kNpmiCoef * best_npmi + kCompletenessCoef * completeness;
    scored.insert(std::move(tokens), sigmoid(z));
  }
  return scored;
}

// ---- matching ----

std::vector<PhraseSpan> match_phrases(const std::vector<std::string>& tokens, const PhrasePool& pool) {
  std::vector<PhraseSpan> spans;
  if (pool.empty()) return spans;
  size_t i = 0;
  while (i < tokens.size()) {
    size_t len = pool.longest_match_at(tokens, i);
    if (len == 0) {
      ++i;
      continue;
    }
    PhraseSpan span;
    span.begin = i;
    span.end = i + len;
    span.score = pool.score_at(tokens, i, len);
    span.origin = PhraseSpan::Origin::Domain;
    spans.push_back(span);
    i += len;
  }
  return spans;
}

std::vector<PhraseSpan> chunk_noun_phrases(const TokenSequence& seq) {
  if (!seq.has_pos())
    throw_invalid("chunk_noun_phrases: sequence has no POS tags; run the tagger first");
  std::vector<PhraseSpan> spans;
  size_t i = 0;
  size_t n = seq.length();
  while (i < n) {
    if (seq.pos[i] != PosTag::Adj && seq.pos[i] != PosTag::Noun) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < n && seq.pos[i] == PosTag::Adj) ++i;
    size_t nouns = 0;
    while (i < n && seq.pos[i] == PosTag::Noun) {
      ++nouns;
      ++i;
    }
    if (nouns >= 1 && i - start >= 2) {
      PhraseSpan span;
      span.begin = start;
      span.end = i;
      span.origin = PhraseSpan::Origin::NounSupplement;
      spans.push_back(span);
    } else if (nouns == 0) {
      // adjective run with no noun head: rescan from the stopping token
      i = start + 1;
      while (i < n && seq.pos[i] == PosTag::Adj) ++i;
    }
  }
  return spans;
}

TempPool build_temp_pool(const TokenSequence& seq, const PhrasePool& domain_pool) {
  TempPool pool;
  std::vector<PhraseSpan> domain = match_phrases(seq.surface, domain_pool);
  std::vector<PhraseSpan> nouns;
  if (seq.has_pos()) nouns = chunk_noun_phrases(seq);

  pool.spans = domain;
  double supplement_score = domain_pool.empty() ? 0.0 : domain_pool.min_score();
  for (auto& span : nouns) {
    bool clean = true;
    for (const auto& d : domain) {
      if (span.intersects(d)) {
        clean = false;
        break;
      }
    }
    if (!clean) continue;
    span.score = supplement_score;
    pool.spans.push_back(span);
  }
  std::sort(pool.spans.begin(), pool.spans.end(),
            [](const PhraseSpan& a, const PhraseSpan& b) { return a.begin < b.begin; });
  return pool;
}

double phrase_overlap(const PhrasePool& domain, const std::vector<std::vector<std::string>>& noun_phrases) {
  if (domain.empty()) throw_invalid("phrase_overlap: domain pool is empty");
  std::unordered_map<std::string, bool> noun_keys;
  for (const auto& p : noun_phrases) noun_keys[key_of(p)] = true;
  size_t hit = 0;
  for (const auto& e : domain.entries())
    if (noun_keys.count(join(e.tokens, " "))) ++hit;
  return double(hit) / double(domain.size());
}

std::vector<std::vector<std::string>> load_phrase_list(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for_each_line(path, [&](size_t, const std::string& line) {
    if (line.empty() || line[0] == '#') return;
    auto fields = split(line, '\t');
    auto tokens = split(fields[0], ' ');
    tokens.erase(std::remove_if(tokens.begin(), tokens.end(), [](const std::string& t) { return t.empty(); }),
                 tokens.end());
    if (!tokens.empty()) out.push_back(std::move(tokens));
  });
  return out;
}

}  // namespace ebert
