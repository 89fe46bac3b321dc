#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace ebert {

namespace {

const char* kSpecialTokens[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

bool is_word_char(unsigned char c) {
  // Bytes >= 0x80 stay inside tokens so UTF-8 survives untouched.
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

const char* pos_tag_name(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Adj: return "ADJ";
    case PosTag::Verb: return "VERB";
    case PosTag::Adv: return "ADV";
    case PosTag::Det: return "DET";
    case PosTag::Adp: return "ADP";
    case PosTag::Pron: return "PRON";
    case PosTag::Num: return "NUM";
    case PosTag::Punct: return "PUNCT";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PosTag parse_pos_tag(const std::string& name) {
  static const std::unordered_map<std::string, PosTag> table = {
      {"NOUN", PosTag::Noun},   {"ADJ", PosTag::Adj},   {"VERB", PosTag::Verb}, {"ADV", PosTag::Adv},
      {"DET", PosTag::Det},     {"ADP", PosTag::Adp},   {"PRON", PosTag::Pron}, {"NUM", PosTag::Num},
      {"PUNCT", PosTag::Punct}, {"OTHER", PosTag::Other}};
  auto it = table.find(name);
  if (it == table.end()) throw_data("unknown POS tag: " + name);
  return it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  bool in_tag = false;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (in_tag) {
      if (c == '>') in_tag = false;
      continue;
    }
    if (c == '<') {
      flush();
      in_tag = true;
      continue;
    }
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      cur += char(std::tolower(c));
    } else {
      flush();
      out.push_back(std::string(1, char(c)));
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kNumSpecials; ++i) {
    id_to_token_.push_back(kSpecialTokens[i]);
    token_to_id_[kSpecialTokens[i]] = i;
  }
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, long>& counts, long min_freq, size_t max_size) {
  if (min_freq < 1) throw_invalid("build_vocab: min_freq must be >= 1");
  if (max_size <= size_t(kNumSpecials)) throw_invalid("build_vocab: max_size must exceed the 5 specials");
  std::vector<std::pair<std::string, long>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [token, count] : counts)
    if (count >= min_freq) ranked.emplace_back(token, count);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size - kNumSpecials) ranked.resize(max_size - kNumSpecials);

  Vocabulary vocab;
  for (const auto& [token, count] : ranked) {
    (void)count;
    vocab.token_to_id_[token] = int(vocab.id_to_token_.size());
    vocab.id_to_token_.push_back(token);
  }
  return vocab;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || size_t(id) >= id_to_token_.size())
    throw_invalid("vocabulary: id " + std::to_string(id) + " out of range");
  return id_to_token_[size_t(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::string content;
  for (const auto& t : id_to_token_) {
    content += t;
    content += '\n';
  }
  atomic_write_file(path, content);
}

Vocabulary Vocabulary::load(const std::string& path) {
  Vocabulary vocab;
  size_t lines = 0;
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    lines = line_no;
    if (line_no <= size_t(kNumSpecials)) {
      if (line != kSpecialTokens[line_no - 1])
        throw_data(path + ":" + std::to_string(line_no) + ": expected special token " +
                   kSpecialTokens[line_no - 1] + ", got '" + line + "'");
      return;
    }
    if (line.empty()) throw_data(path + ":" + std::to_string(line_no) + ": empty vocabulary entry");
    vocab.token_to_id_[line] = int(vocab.id_to_token_.size());
    vocab.id_to_token_.push_back(line);
  });
  if (lines < size_t(kNumSpecials)) throw_data(path + ": vocabulary file truncated");
  return vocab;
}

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, size_t max_len) {
  if (max_len < 2) throw_invalid("encode: max_len must be >= 2");
  std::vector<int> ids;
  ids.reserve(std::min(tokens.size() + 2, max_len));
  ids.push_back(Vocabulary::kCls);
  for (const auto& t : tokens) {
    if (ids.size() == max_len - 1) break;
    ids.push_back(vocab.id(t));
  }
  ids.push_back(Vocabulary::kSep);
  return ids;
}

std::vector<std::string> decode(const std::vector<int>& ids, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (vocab.is_special(id)) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

TokenSequence make_sequence(const std::vector<std::string>& tokens, const Vocabulary& vocab, size_t max_len,
                            std::string doc_id) {
  TokenSequence seq;
  seq.doc_id = std::move(doc_id);
  seq.ids = encode(tokens, vocab, max_len);
  seq.surface.reserve(seq.ids.size());
  seq.surface.push_back("[CLS]");
  size_t content = seq.ids.size() - 2;
  for (size_t i = 0; i < content; ++i) seq.surface.push_back(tokens[i]);
  seq.surface.push_back("[SEP]");
  return seq;
}

// ---- POS tagging ----

PosTagger::PosTagger() {
  static const std::pair<const char*, PosTag> kBuiltin[] = {
      {"the", PosTag::Det},    {"a", PosTag::Det},       {"an", PosTag::Det},      {"this", PosTag::Det},
      {"that", PosTag::Det},   {"these", PosTag::Det},   {"those", PosTag::Det},   {"its", PosTag::Det},
      {"your", PosTag::Det},   {"our", PosTag::Det},     {"of", PosTag::Adp},      {"in", PosTag::Adp},
      {"on", PosTag::Adp},     {"for", PosTag::Adp},     {"with", PosTag::Adp},    {"at", PosTag::Adp},
      {"by", PosTag::Adp},     {"from", PosTag::Adp},    {"to", PosTag::Adp},      {"into", PosTag::Adp},
      {"and", PosTag::Other},  {"or", PosTag::Other},    {"but", PosTag::Other},   {"not", PosTag::Adv},
      {"it", PosTag::Pron},    {"they", PosTag::Pron},   {"you", PosTag::Pron},    {"we", PosTag::Pron},
      {"i", PosTag::Pron},     {"he", PosTag::Pron},     {"she", PosTag::Pron},
      {"is", PosTag::Verb},    {"are", PosTag::Verb},    {"was", PosTag::Verb},    {"were", PosTag::Verb},
      {"be", PosTag::Verb},    {"been", PosTag::Verb},   {"has", PosTag::Verb},    {"have", PosTag::Verb},
      {"had", PosTag::Verb},   {"do", PosTag::Verb},     {"does", PosTag::Verb},   {"can", PosTag::Verb},
      {"will", PosTag::Verb},  {"would", PosTag::Verb},  {"fits", PosTag::Verb},   {"works", PosTag::Verb},
      {"makes", PosTag::Verb}, {"keeps", PosTag::Verb},  {"buy", PosTag::Verb},    {"use", PosTag::Verb},
      {"very", PosTag::Adv},   {"too", PosTag::Adv},     {"also", PosTag::Adv},    {"only", PosTag::Adv},
      {"more", PosTag::Adv},   {"most", PosTag::Adv},
      {"new", PosTag::Adj},    {"good", PosTag::Adj},    {"great", PosTag::Adj},   {"best", PosTag::Adj},
      {"high", PosTag::Adj},   {"low", PosTag::Adj},     {"big", PosTag::Adj},     {"small", PosTag::Adj},
      {"large", PosTag::Adj},  {"long", PosTag::Adj},    {"short", PosTag::Adj},   {"soft", PosTag::Adj},
      {"hard", PosTag::Adj},   {"heavy", PosTag::Adj},   {"light", PosTag::Adj},   {"red", PosTag::Adj},
      {"blue", PosTag::Adj},   {"green", PosTag::Adj},   {"black", PosTag::Adj},   {"white", PosTag::Adj},
      {"grey", PosTag::Adj},   {"gray", PosTag::Adj},    {"easy", PosTag::Adj},    {"cheap", PosTag::Adj},
      {"durable", PosTag::Adj}, {"premium", PosTag::Adj}, {"portable", PosTag::Adj},
  };
  for (const auto& [token, tag] : kBuiltin) lexicon_.emplace(token, tag);
}

void PosTagger::load_lexicon(const std::string& path) {
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    if (line.empty() || line[0] == '#') return;
    auto fields = split(line, '\t');
    if (fields.size() != 2) throw_data(path + ":" + std::to_string(line_no) + ": expected token<TAB>TAG");
    lexicon_[to_lower_ascii(fields[0])] = parse_pos_tag(fields[1]);
  });
}

PosTag PosTagger::tag(const std::string& token) const {
  auto it = lexicon_.find(token);
  if (it != lexicon_.end()) return it->second;
  if (token.size() == 1 && !is_word_char(static_cast<unsigned char>(token[0]))) return PosTag::Punct;
  bool all_digits = !token.empty();
  for (unsigned char c : token)
    if (!std::isdigit(c)) {
      all_digits = false;
      break;
    }
  if (all_digits) return PosTag::Num;
  auto ends = [&](const char* suffix) {
    size_t n = std::char_traits<char>::length(suffix);
    return token.size() > n + 1 && token.compare(token.size() - n, n, suffix) == 0;
  };
  if (ends("ly")) return PosTag::Adv;
  if (ends("ing") || ends("ed")) return PosTag::Verb;
  if (ends("ous") || ends("ful") || ends("ive") || ends("able") || ends("ible") || ends("ical")) return PosTag::Adj;
  return PosTag::Noun;
}

void PosTagger::tag_sequence(TokenSequence& seq) const {
  seq.pos.assign(seq.length(), PosTag::Other);
  for (size_t i = 0; i < seq.length(); ++i) {
    int id = seq.ids[i];
    if (id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad) {
      seq.pos[i] = PosTag::Other;
    } else {
      seq.pos[i] = tag(seq.surface[i]);
    }
  }
}

// ---- corpora ----

std::vector<std::string> ProductDoc::content() const {
  std::vector<std::string> out = title;
  out.insert(out.end(), description.begin(), description.end());
  return out;
}

std::vector<ProductDoc> read_product_corpus(const std::string& path, CorpusStats* stats) {
  std::vector<ProductDoc> docs;
  CorpusStats local;
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    if (line.empty()) return;
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw_data(path + ":" + std::to_string(line_no) + ": expected product_id<TAB>title<TAB>description");
    ProductDoc doc;
    doc.id = fields[0];
    doc.title = tokenize(fields[1]);
    doc.description = tokenize(fields[2]);
    if (doc.title.empty() && doc.description.empty()) {
      ++local.skipped_empty;
      return;
    }
    ++local.kept;
    docs.push_back(std::move(doc));
  });
  if (stats) *stats = local;
  return docs;
}

std::vector<ReviewDoc> read_review_corpus(const std::string& path, CorpusStats* stats) {
  std::vector<ReviewDoc> docs;
  CorpusStats local;
  for_each_line(path, [&](size_t line_no, const std::string& line) {
    if (line.empty()) return;
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw_data(path + ":" + std::to_string(line_no) + ": expected review_id<TAB>product_id<TAB>text");
    ReviewDoc doc;
    doc.id = fields[0];
    doc.product_id = fields[1];
    doc.body = tokenize(fields[2]);
    if (doc.body.empty()) {
      ++local.skipped_empty;
      return;
    }
    ++local.kept;
    docs.push_back(std::move(doc));
  });
  if (stats) *stats = local;
  return docs;
}

TokenSequence make_product_sequence(const ProductDoc& doc, const Vocabulary& vocab, size_t max_len) {
  // title [SEP] description joined into one input sequence
  TokenSequence seq;
  seq.doc_id = doc.id;
  seq.ids.push_back(Vocabulary::kCls);
  seq.surface.push_back("[CLS]");
  auto append = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      if (seq.ids.size() >= max_len - 1) return;
      seq.ids.push_back(vocab.id(t));
      seq.surface.push_back(t);
    }
  };
  append(doc.title);
  if (!doc.description.empty() && seq.ids.size() < max_len - 1) {
    seq.ids.push_back(Vocabulary::kSep);
    seq.surface.push_back("[SEP]");
    append(doc.description);
  }
  seq.ids.push_back(Vocabulary::kSep);
  seq.surface.push_back("[SEP]");
  return seq;
}

TokenSequence make_review_sequence(const ReviewDoc& doc, const Vocabulary& vocab, size_t max_len) {
  return make_sequence(doc.body, vocab, max_len, doc.id);
}

std::unordered_map<std::string, long> count_corpus_tokens(const std::string& products_path,
                                                          const std::string& reviews_path) {
  std::unordered_map<std::string, long> counts;
  auto count_tokens = [&](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) ++counts[t];
  };
  if (!products_path.empty()) {
    for (const auto& doc : read_product_corpus(products_path)) {
      count_tokens(doc.title);
      count_tokens(doc.description);
    }
  }
  if (!reviews_path.empty()) {
    for (const auto& doc : read_review_corpus(reviews_path)) count_tokens(doc.body);
  }
  return counts;
}

}  // namespace ebert
