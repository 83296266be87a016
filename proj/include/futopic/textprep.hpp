#pragma once

// Tweet normalization, vocabulary construction and bag-of-words encoding.
//
// normalize_tweet applies, in order:
//   1. Unicode NFC, then full lowercase
//   2. drop URLs (http://, https://, www., t.co/ up to the next whitespace)
//   3. drop @mentions
//   4. keep #hashtags as one token including the '#'
//   5. split everything else on non-alphanumeric code points
//   6. drop stopwords (plain words only)
//   7. drop tokens shorter than 2 code points, not counting a leading '#'

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <json.hpp>

#include "futopic/corpus.hpp"
#include "futopic/error.hpp"
#include "futopic/parallel.hpp"

namespace futopic {

using TermId = std::uint32_t;

inline constexpr std::string_view kBundledStopwordsId = "en-v1";

// Must match data/stopwords-en-v1.txt (checked by the test suite).
inline const std::vector<std::string_view>& bundled_stopwords() {
  static const std::vector<std::string_view> words{
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "couldn", "didn", "doesn", "hadn", "hasn", "haven", "isn", "ma", "mightn", "mustn",
    "needn", "shan", "shouldn", "wasn", "weren", "won", "wouldn", "rt", "amp"};
  return words;
}

struct StopwordList {
  std::string id;
  std::unordered_set<std::string> words;

  static StopwordList bundled() {
    StopwordList s{std::string(kBundledStopwordsId), {}};
    for (auto w : bundled_stopwords()) s.words.emplace(w);
    return s;
  }

  // One word per line; blank lines and '#' comments ignored. The id is the file stem.
  static StopwordList load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stopword list " + path.string());
    StopwordList s{path.stem().string(), {}};
    std::string line;
    while (std::getline(in, line)) {
      auto t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      s.words.emplace(t);
    }
    return s;
  }
};

class Tokenizer {
 public:
  explicit Tokenizer(StopwordList stopwords = StopwordList::bundled()) : stopwords_(std::move(stopwords)) {
    UErrorCode status = U_ZERO_ERROR;
    nfc_ = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error(std::string("ICU NFC unavailable: ") + u_errorName(status));
  }

  const StopwordList& stopwords() const { return stopwords_; }

  std::vector<std::string> operator()(std::string_view text) const {
    std::vector<std::string> tokens;
    if (text.empty()) return tokens;

    UErrorCode status = U_ZERO_ERROR;
    const auto raw = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    icu::UnicodeString s = nfc_->normalize(raw, status);
    if (U_FAILURE(status)) s = raw;
    s.toLower(icu::Locale::getRoot());

    std::vector<UChar32> cps;
    cps.reserve(static_cast<std::size_t>(s.length()));
    for (int32_t i = 0; i < s.length();) {
      const UChar32 c = s.char32At(i);
      cps.push_back(c);
      i += U16_LENGTH(c);
    }

    std::vector<UChar32> current;
    auto flush = [&](bool hashtag) {
      if (current.empty()) return;
      const std::size_t len = current.size() - (hashtag ? 1 : 0);
      std::string token = to_utf8(current);
      current.clear();
      if (len < 2) return;
      if (!hashtag && stopwords_.words.contains(token)) return;
      tokens.push_back(std::move(token));
    };

    const std::size_t n = cps.size();
    std::size_t i = 0;
    while (i < n) {
      const bool boundary = i == 0 || !is_word(cps[i - 1]);
      if (boundary && starts_url(cps, i)) {
        while (i < n && !u_isUWhiteSpace(cps[i])) ++i;
        continue;
      }
      if (boundary && cps[i] == U'@' && i + 1 < n && is_word(cps[i + 1])) {
        ++i;
        while (i < n && is_word(cps[i])) ++i;
        continue;
      }
      if (boundary && cps[i] == U'#' && i + 1 < n && is_word(cps[i + 1])) {
        current.push_back(U'#');
        ++i;
        while (i < n && is_word(cps[i])) current.push_back(cps[i++]);
        flush(true);
        continue;
      }
      if (u_isalnum(cps[i])) {
        while (i < n && u_isalnum(cps[i])) current.push_back(cps[i++]);
        flush(false);
        continue;
      }
      ++i;
    }
    return tokens;
  }

 private:
  static bool is_word(UChar32 c) { return u_isalnum(c) || c == U'_'; }

  static bool starts_with(const std::vector<UChar32>& cps, std::size_t i, std::u32string_view prefix) {
    if (i + prefix.size() > cps.size()) return false;
    for (std::size_t k = 0; k < prefix.size(); ++k) {
      if (cps[i + k] != static_cast<UChar32>(prefix[k])) return false;
    }
    return true;
  }

  static bool starts_url(const std::vector<UChar32>& cps, std::size_t i) {
    return starts_with(cps, i, U"http://") || starts_with(cps, i, U"https://") ||
           starts_with(cps, i, U"www.") || starts_with(cps, i, U"t.co/");
  }

  static std::string to_utf8(const std::vector<UChar32>& cps) {
    icu::UnicodeString u;
    for (auto c : cps) u.append(c);
    std::string out;
    u.toUTF8String(out);
    return out;
  }

  StopwordList stopwords_;
  const icu::Normalizer2* nfc_ = nullptr;
};

inline std::vector<std::string> normalize_tweet(std::string_view text) {
  static const Tokenizer tokenizer;
  return tokenizer(text);
}

struct VocabParams {
  std::uint64_t min_df = 5;
  double max_df_ratio = 0.5;
  std::string stopword_list_id = std::string(kBundledStopwordsId);

  bool operator==(const VocabParams&) const = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  // Terms must be sorted and unique; ids follow that order.
  Vocabulary(std::vector<std::string> terms, std::vector<std::uint64_t> doc_freq, std::uint64_t total_docs,
             VocabParams params)
      : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), total_docs_(total_docs), params_(std::move(params)) {
    if (terms_.size() != doc_freq_.size()) throw InvalidArgument("vocabulary term/df length mismatch");
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (!index_.emplace(terms_[i], static_cast<TermId>(i)).second) {
        throw FormatError("duplicate vocabulary term '" + terms_[i] + "'");
      }
    }
  }

  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  std::uint64_t total_docs() const { return total_docs_; }
  const VocabParams& params() const { return params_; }
  const std::string& term(TermId id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const { return terms_; }
  std::uint64_t doc_freq(TermId id) const { return doc_freq_.at(id); }

  std::optional<TermId> lookup(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i) terms.push_back({terms_[i], i, doc_freq_[i]});
    return {{"schema_version", 1},
            {"total_docs", total_docs_},
            {"build_params",
             {{"min_df", params_.min_df}, {"max_df_ratio", params_.max_df_ratio},
              {"stopword_list_id", params_.stopword_list_id}}},
            {"terms", std::move(terms)}};
  }

  static Vocabulary from_json(const nlohmann::json& j) {
    try {
      VocabParams p;
      const auto& bp = j.at("build_params");
      bp.at("min_df").get_to(p.min_df);
      bp.at("max_df_ratio").get_to(p.max_df_ratio);
      bp.at("stopword_list_id").get_to(p.stopword_list_id);
      std::vector<std::string> terms;
      std::vector<std::uint64_t> df;
      for (const auto& t : j.at("terms")) {
        if (t.at(1).get<std::size_t>() != terms.size()) throw FormatError("vocabulary ids are not dense");
        terms.push_back(t.at(0).get<std::string>());
        df.push_back(t.at(2).get<std::uint64_t>());
      }
      return Vocabulary(std::move(terms), std::move(df), j.at("total_docs").get<std::uint64_t>(), std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed vocabulary JSON: ") + e.what());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json().dump(1) << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("vocabulary is not valid JSON: " + path.string());
    return from_json(j);
  }

  bool operator==(const Vocabulary& o) const {
    return terms_ == o.terms_ && doc_freq_ == o.doc_freq_ && total_docs_ == o.total_docs_ && params_ == o.params_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::uint64_t> doc_freq_;
  std::uint64_t total_docs_ = 0;
  VocabParams params_;
  std::unordered_map<std::string, TermId> index_;
};

// Streaming document-frequency counter; feed one token list per document.
class VocabularyBuilder {
 public:
  explicit VocabularyBuilder(VocabParams params) : params_(std::move(params)) {
    if (params_.min_df < 1) throw InvalidArgument("min_df must be at least 1");
    if (!(params_.max_df_ratio > 0.0 && params_.max_df_ratio <= 1.0)) {
      throw InvalidArgument("max_df_ratio must lie in (0, 1]");
    }
  }

  void add_document(const std::vector<std::string>& tokens) {
    ++total_docs_;
    seen_.clear();
    for (const auto& t : tokens) {
      if (seen_.insert(t).second) ++df_[t];
    }
  }

  Vocabulary finish() && {
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    const double cap = params_.max_df_ratio * static_cast<double>(total_docs_);
    for (auto& [term, df] : df_) {
      if (df >= params_.min_df && static_cast<double>(df) <= cap) kept.emplace_back(term, df);
    }
    if (kept.empty()) {
      throw Error("vocabulary is empty after filtering (min_df=" + std::to_string(params_.min_df) +
                  ", max_df_ratio=" + std::to_string(params_.max_df_ratio) + ", docs=" +
                  std::to_string(total_docs_) + "); loosen --min-df or raise --max-df");
    }
    std::sort(kept.begin(), kept.end());
    std::vector<std::string> terms;
    std::vector<std::uint64_t> df;
    terms.reserve(kept.size());
    df.reserve(kept.size());
    for (auto& [t, f] : kept) {
      terms.push_back(std::move(t));
      df.push_back(f);
    }
    return Vocabulary(std::move(terms), std::move(df), total_docs_, params_);
  }

 private:
  VocabParams params_;
  std::uint64_t total_docs_ = 0;
  std::unordered_map<std::string, std::uint64_t> df_;
  std::unordered_set<std::string> seen_;
};

inline Vocabulary build_vocabulary(const CorpusStore& store, const Tokenizer& tokenizer, VocabParams params) {
  params.stopword_list_id = tokenizer.stopwords().id;
  VocabularyBuilder builder(params);
  auto reader = store.reader();
  TweetRecord r;
  while (reader.next(r)) builder.add_document(tokenizer(r.text));
  return std::move(builder).finish();
}

struct BowDoc {
  TweetId doc_id = 0;
  std::vector<std::pair<TermId, std::uint32_t>> counts;  // sorted by term id, all counts > 0
  std::uint64_t total_tokens = 0;

  bool operator==(const BowDoc&) const = default;
};

inline BowDoc encode_bow(const std::vector<std::string>& tokens, const Vocabulary& vocab, TweetId doc_id = 0) {
  BowDoc doc;
  doc.doc_id = doc_id;
  std::vector<TermId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (auto id = vocab.lookup(t)) ids.push_back(*id);
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size();) {
    std::size_t j = i;
    while (j < ids.size() && ids[j] == ids[i]) ++j;
    doc.counts.emplace_back(ids[i], static_cast<std::uint32_t>(j - i));
    i = j;
  }
  doc.total_tokens = ids.size();
  return doc;
}

// Streams a corpus store as bag-of-words batches. Tokenization of a batch is
// data-parallel; documents keep their persisted order.
class CorpusBowSource {
 public:
  CorpusBowSource(const CorpusStore& store, const Tokenizer& tokenizer, const Vocabulary& vocab,
                  std::size_t batch_size, Parallelism par = {})
      : store_(&store), tokenizer_(&tokenizer), vocab_(&vocab), batch_size_(batch_size), par_(par),
        reader_(store.reader()) {
    if (batch_size_ == 0) throw InvalidArgument("batch_size must be at least 1");
  }

  bool next(std::vector<BowDoc>& batch) {
    if (!reader_.next_batch(batch_size_, records_)) {
      batch.clear();
      return false;
    }
    batch.resize(records_.size());
    parallel_for(records_.size(), par_, [&](std::size_t i) {
      batch[i] = encode_bow((*tokenizer_)(records_[i].text), *vocab_, records_[i].id);
    });
    return true;
  }

  void rewind() { reader_ = store_->reader(); }

  // Timestamps of the records behind the most recent batch.
  const std::vector<TweetRecord>& last_records() const { return records_; }

 private:
  const CorpusStore* store_;
  const Tokenizer* tokenizer_;
  const Vocabulary* vocab_;
  std::size_t batch_size_;
  Parallelism par_;
  CorpusStore::Reader reader_;
  std::vector<TweetRecord> records_;
};

// In-memory source over prepared documents.
class VectorBowSource {
 public:
  VectorBowSource(const std::vector<BowDoc>& docs, std::size_t batch_size) : docs_(&docs), batch_size_(batch_size) {
    if (batch_size_ == 0) throw InvalidArgument("batch_size must be at least 1");
  }

  bool next(std::vector<BowDoc>& batch) {
    batch.clear();
    while (batch.size() < batch_size_ && pos_ < docs_->size()) batch.push_back((*docs_)[pos_++]);
    return !batch.empty();
  }

  void rewind() { pos_ = 0; }

 private:
  const std::vector<BowDoc>* docs_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
};

// Streams normalized token lists (not vocabulary-filtered) in corpus order.
class CorpusTokenSource {
 public:
  CorpusTokenSource(const CorpusStore& store, const Tokenizer& tokenizer, std::size_t batch_size,
                    Parallelism par = {})
      : store_(&store), tokenizer_(&tokenizer), batch_size_(batch_size), par_(par), reader_(store.reader()) {
    if (batch_size_ == 0) throw InvalidArgument("batch_size must be at least 1");
  }

  bool next(std::vector<std::vector<std::string>>& batch) {
    if (!reader_.next_batch(batch_size_, records_)) {
      batch.clear();
      return false;
    }
    batch.resize(records_.size());
    parallel_for(records_.size(), par_, [&](std::size_t i) { batch[i] = (*tokenizer_)(records_[i].text); });
    return true;
  }

  void rewind() { reader_ = store_->reader(); }

 private:
  const CorpusStore* store_;
  const Tokenizer* tokenizer_;
  std::size_t batch_size_;
  Parallelism par_;
  CorpusStore::Reader reader_;
  std::vector<TweetRecord> records_;
};

}  // namespace futopic
