#pragma once

// C_V topic coherence.
//
// Statistics come from boolean sliding windows over each tokenized document:
// a document of L tokens yields max(1, L - window + 1) windows (step 1, a short
// document is one window), and a word or pair counts once per window.
// Confirmation uses NPMI context vectors against the topic's own top words and
// the cosine of each word's vector with their sum, averaged over words.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "futopic/error.hpp"
#include "futopic/parallel.hpp"

namespace futopic::coherence {

struct CoherenceConfig {
  std::size_t window_size = 110;
  std::size_t top_n = 10;
  double epsilon = 1e-12;
  double gamma_exponent = 1.0;

  void validate() const {
    if (window_size < 1) throw InvalidArgument("window size must be at least 1");
    if (top_n < 2) throw InvalidArgument("top_n must be at least 2");
    if (!(epsilon >= 0.0)) throw InvalidArgument("epsilon must be non-negative");
  }
};

using Document = std::vector<std::string>;

// Window occurrence counts for a fixed evaluation word set.
class WindowStats {
 public:
  WindowStats() = default;

  explicit WindowStats(std::vector<std::string> eval_words) : words_(std::move(eval_words)) {
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
    if (words_.empty()) throw InvalidArgument("evaluation word set must be non-empty");
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], static_cast<std::uint32_t>(i));
    term_.assign(words_.size(), 0);
  }

  const std::vector<std::string>& words() const { return words_; }
  std::uint64_t window_count() const { return windows_; }

  std::optional<std::uint32_t> index_of(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint64_t term_windows(std::uint32_t i) const { return term_.at(i); }
  std::uint64_t pair_windows(std::uint32_t i, std::uint32_t j) const {
    if (i == j) return term_.at(i);
    auto it = pair_.find(key(i, j));
    return it == pair_.end() ? 0 : it->second;
  }

  std::uint64_t term_windows(const std::string& w) const {
    auto i = index_of(w);
    return i ? term_[*i] : 0;
  }
  std::uint64_t pair_windows(const std::string& a, const std::string& b) const {
    auto i = index_of(a);
    auto j = index_of(b);
    return i && j ? pair_windows(*i, *j) : 0;
  }

  // Slides a window over one document and counts eval-word presence.
  void add_document(const Document& doc, std::size_t window_size) {
    const std::size_t len = doc.size();
    std::vector<std::int64_t> ids(len);
    for (std::size_t t = 0; t < len; ++t) {
      auto i = index_of(doc[t]);
      ids[t] = i ? static_cast<std::int64_t>(*i) : -1;
    }
    const std::size_t span = std::min(len, window_size);
    const std::size_t windows = len <= window_size ? 1 : len - window_size + 1;
    windows_ += windows;

    std::unordered_map<std::uint32_t, std::uint32_t> multiplicity;
    std::vector<std::uint32_t> present;
    auto enter = [&](std::int64_t id) {
      if (id < 0) return;
      if (multiplicity[static_cast<std::uint32_t>(id)]++ == 0) present.push_back(static_cast<std::uint32_t>(id));
    };
    auto leave = [&](std::int64_t id) {
      if (id < 0) return;
      if (--multiplicity[static_cast<std::uint32_t>(id)] == 0) {
        auto it = std::find(present.begin(), present.end(), static_cast<std::uint32_t>(id));
        *it = present.back();
        present.pop_back();
      }
    };
    auto count_window = [&] {
      for (std::size_t a = 0; a < present.size(); ++a) {
        ++term_[present[a]];
        for (std::size_t b = a + 1; b < present.size(); ++b) ++pair_[key(present[a], present[b])];
      }
    };

    for (std::size_t t = 0; t < span; ++t) enter(ids[t]);
    count_window();
    for (std::size_t start = 1; start < windows; ++start) {
      leave(ids[start - 1]);
      enter(ids[start + window_size - 1]);
      count_window();
    }
  }

  void merge(const WindowStats& other) {
    if (other.words_ != words_) throw InvalidArgument("cannot merge stats over different word sets");
    windows_ += other.windows_;
    for (std::size_t i = 0; i < term_.size(); ++i) term_[i] += other.term_[i];
    for (const auto& [k, v] : other.pair_) pair_[k] += v;
  }

 private:
  static std::uint64_t key(std::uint32_t i, std::uint32_t j) {
    if (i > j) std::swap(i, j);
    return (static_cast<std::uint64_t>(i) << 32) | j;
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint64_t windows_ = 0;
  std::vector<std::uint64_t> term_;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_;
};

// Counts a batch of documents in parallel; per-worker partial counts are
// integers, so merging them is order independent.
inline void accumulate_windows(WindowStats& stats, std::span<const Document> docs, std::size_t window_size,
                               Parallelism par = {}) {
  const std::size_t workers = std::min<std::size_t>(par.resolved(), std::max<std::size_t>(1, docs.size() / 64));
  if (workers <= 1) {
    for (const auto& d : docs) stats.add_document(d, window_size);
    return;
  }
  std::vector<WindowStats> partial(workers, WindowStats(stats.words()));
  const std::size_t chunk = (docs.size() + workers - 1) / workers;
  parallel_for(workers, Parallelism{static_cast<unsigned>(workers)}, [&](std::size_t w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(docs.size(), lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) partial[w].add_document(docs[i], window_size);
  });
  for (const auto& p : partial) stats.merge(p);
}

inline WindowStats window_stats(std::span<const Document> docs, std::vector<std::string> eval_words,
                                const CoherenceConfig& config, Parallelism par = {}) {
  config.validate();
  WindowStats stats(std::move(eval_words));
  accumulate_windows(stats, docs, config.window_size, par);
  return stats;
}

// ln((P_ij + eps) / (P_i P_j)) / -ln(P_ij + eps), clamped to [-1, 1]; zero when
// either marginal is zero.
inline double npmi(const WindowStats& stats, std::uint32_t i, std::uint32_t j, double epsilon) {
  const double n = static_cast<double>(stats.window_count());
  if (n == 0.0) return 0.0;
  const double pi = static_cast<double>(stats.term_windows(i)) / n;
  const double pj = static_cast<double>(stats.term_windows(j)) / n;
  if (pi == 0.0 || pj == 0.0) return 0.0;
  const double pij = static_cast<double>(stats.pair_windows(i, j)) / n;
  const double denom = -std::log(pij + epsilon);
  if (denom == 0.0) return 1.0;
  // epsilon pushes perfectly co-occurring pairs marginally past 1
  return std::clamp(std::log((pij + epsilon) / (pi * pj)) / denom, -1.0, 1.0);
}

inline double npmi(const WindowStats& stats, const std::string& a, const std::string& b, double epsilon) {
  auto i = stats.index_of(a);
  auto j = stats.index_of(b);
  if (!i || !j) return 0.0;
  return npmi(stats, *i, *j, epsilon);
}

struct TopicScore {
  double score = 0.0;
  bool degenerate = false;  // every context vector was zero
};

// C_V for one topic's top words (all must be in the stats' word set).
inline TopicScore cv_topic(const WindowStats& stats, const std::vector<std::string>& top_words,
                           const CoherenceConfig& config) {
  const std::size_t n = top_words.size();
  if (n < 2) throw InvalidArgument("C_V needs at least two words");
  std::vector<std::uint32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto id = stats.index_of(top_words[i]);
    if (!id) throw InvalidArgument("word '" + top_words[i] + "' not covered by window statistics");
    ids[i] = *id;
  }
  auto power = [&](double x) {
    if (config.gamma_exponent == 1.0) return x;
    return std::copysign(std::pow(std::abs(x), config.gamma_exponent), x);
  };
  std::vector<std::vector<double>> context(n, std::vector<double>(n));
  std::vector<double> total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      context[i][j] = power(npmi(stats, ids[i], ids[j], config.epsilon));
      total[j] += context[i][j];
    }
  }
  double total_norm = 0.0;
  for (double x : total) total_norm += x * x;
  total_norm = std::sqrt(total_norm);

  TopicScore out;
  double sum = 0.0;
  bool any_nonzero = false;
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dot += context[i][j] * total[j];
      norm += context[i][j] * context[i][j];
    }
    if (norm > 0.0) any_nonzero = true;
    if (norm > 0.0 && total_norm > 0.0) sum += dot / (std::sqrt(norm) * total_norm);
  }
  out.degenerate = !any_nonzero;
  out.score = out.degenerate ? 0.0 : sum / static_cast<double>(n);
  return out;
}

struct TopicCoherence {
  std::size_t topic_id = 0;
  std::vector<std::string> words;  // words actually scored
  std::optional<double> score;     // empty when the topic was excluded
  std::string note;
};

struct ModelCoherence {
  std::vector<TopicCoherence> per_topic;
  double mean = 0.0;
  std::uint64_t window_count = 0;
  CoherenceConfig config;

  nlohmann::json to_json() const {
    nlohmann::json topics = nlohmann::json::array();
    for (const auto& t : per_topic) {
      nlohmann::json j{{"topic_id", t.topic_id}, {"words", t.words}};
      j["score"] = t.score ? nlohmann::json(*t.score) : nlohmann::json(nullptr);
      if (!t.note.empty()) j["note"] = t.note;
      topics.push_back(std::move(j));
    }
    return {{"schema_version", 1},
            {"measure", "c_v"},
            {"per_topic", std::move(topics)},
            {"mean", mean},
            {"window_count", window_count},
            {"config",
             {{"window_size", config.window_size}, {"top_n", config.top_n}, {"epsilon", config.epsilon},
              {"gamma_exponent", config.gamma_exponent}}}};
  }
};

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
  return [](const std::string& msg) { std::cerr << "coherence: " << msg << '\n'; };
}

// Source concept: `bool next(std::vector<Document>& batch)` in corpus order.
template <typename Source>
concept DocumentSource = requires(Source& s, std::vector<Document>& batch) {
  { s.next(batch) } -> std::convertible_to<bool>;
};

// One pass over the corpus collects statistics for the union of every topic's
// first top_n words; topics with fewer than two words seen in the corpus are
// excluded from the mean.
template <DocumentSource Source>
ModelCoherence cv_model(Source& corpus, const std::vector<std::vector<std::string>>& topics,
                        const CoherenceConfig& config, Parallelism par = {},
                        const WarningSink& warn = stderr_warnings()) {
  config.validate();
  if (topics.empty()) throw InvalidArgument("no topics to score");
  std::vector<std::vector<std::string>> heads;
  std::vector<std::string> all;
  for (const auto& t : topics) {
    std::vector<std::string> head;
    for (const auto& w : t) {
      if (head.size() == config.top_n) break;
      if (std::find(head.begin(), head.end(), w) == head.end()) head.push_back(w);
    }
    all.insert(all.end(), head.begin(), head.end());
    heads.push_back(std::move(head));
  }
  if (all.empty()) throw InvalidArgument("topics contain no words");
  WindowStats stats(all);
  std::vector<Document> batch;
  while (corpus.next(batch)) accumulate_windows(stats, batch, config.window_size, par);

  ModelCoherence out;
  out.config = config;
  out.window_count = stats.window_count();
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t t = 0; t < heads.size(); ++t) {
    TopicCoherence tc;
    tc.topic_id = t;
    for (const auto& w : heads[t]) {
      if (stats.term_windows(w) > 0) tc.words.push_back(w);
    }
    if (tc.words.size() < 2) {
      tc.note = "excluded: fewer than two words occur in the corpus";
      if (warn) warn("topic " + std::to_string(t) + " " + tc.note);
    } else {
      const auto s = cv_topic(stats, tc.words, config);
      if (s.degenerate) {
        tc.note = "all context vectors are zero";
        if (warn) warn("topic " + std::to_string(t) + ": " + tc.note);
      }
      tc.score = s.score;
      sum += s.score;
      ++scored;
    }
    out.per_topic.push_back(std::move(tc));
  }
  if (scored == 0) throw Error("no topic has two or more words present in the corpus");
  out.mean = sum / static_cast<double>(scored);
  return out;
}

// In-memory document source.
class VectorDocumentSource {
 public:
  VectorDocumentSource(const std::vector<Document>& docs, std::size_t batch_size = 4096)
      : docs_(&docs), batch_size_(batch_size) {}

  bool next(std::vector<Document>& batch) {
    batch.clear();
    while (batch.size() < batch_size_ && pos_ < docs_->size()) batch.push_back((*docs_)[pos_++]);
    return !batch.empty();
  }
  void rewind() { pos_ = 0; }

 private:
  const std::vector<Document>* docs_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
};

// "a:b:s" (inclusive, step s) or a comma list; result sorted and unique.
inline std::vector<std::uint32_t> parse_k_grid(const std::string& spec) {
  std::vector<std::uint32_t> out;
  auto parse_uint = [&](const std::string& s) -> std::uint32_t {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty() || v == 0 || v > std::numeric_limits<std::uint32_t>::max()) {
      throw InvalidArgument("bad k-grid value '" + s + "' in '" + spec + "'");
    }
    return static_cast<std::uint32_t>(v);
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t p = spec.find(':'); p != std::string::npos; p = spec.find(':', start)) {
      parts.push_back(spec.substr(start, p - start));
      start = p + 1;
    }
    parts.push_back(spec.substr(start));
    if (parts.size() < 2 || parts.size() > 3) throw InvalidArgument("k-grid must be start:stop[:step]");
    const auto lo = parse_uint(parts[0]);
    const auto hi = parse_uint(parts[1]);
    const auto step = parts.size() == 3 ? parse_uint(parts[2]) : 1u;
    if (lo > hi) throw InvalidArgument("k-grid start exceeds stop");
    for (std::uint64_t k = lo; k <= hi; k += step) out.push_back(static_cast<std::uint32_t>(k));
  } else {
    std::size_t start = 0;
    while (start <= spec.size()) {
      const auto p = spec.find(',', start);
      out.push_back(parse_uint(spec.substr(start, p == std::string::npos ? std::string::npos : p - start)));
      if (p == std::string::npos) break;
      start = p + 1;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw InvalidArgument("k-grid is empty");
  return out;
}

struct SweepEntry {
  std::uint32_t k = 0;
  std::optional<double> score;
  std::string error;
};

struct SweepResult {
  std::vector<SweepEntry> table;  // sorted by k
  std::optional<std::uint32_t> best_k;

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : table) {
      nlohmann::json r{{"k", e.k}, {"score", e.score ? nlohmann::json(*e.score) : nlohmann::json(nullptr)}};
      if (!e.error.empty()) r["error"] = e.error;
      rows.push_back(std::move(r));
    }
    return {{"schema_version", 1},
            {"metric", "c_v"},
            {"table", std::move(rows)},
            {"argmax_k", best_k ? nlohmann::json(*best_k) : nlohmann::json(nullptr)}};
  }
};

// trainer(k) returns topic word lists; scorer(topics) returns a mean score.
// A failing k is recorded and skipped; ties resolve to the smaller k.
template <typename Trainer, typename Scorer>
SweepResult sweep(std::vector<std::uint32_t> k_grid, Trainer&& trainer, Scorer&& scorer) {
  if (k_grid.empty()) throw InvalidArgument("k-grid must be non-empty");
  std::sort(k_grid.begin(), k_grid.end());
  k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());
  SweepResult out;
  for (auto k : k_grid) {
    SweepEntry e;
    e.k = k;
    try {
      e.score = scorer(trainer(k));
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
    if (e.score && (!out.best_k || *e.score > *std::find_if(out.table.begin(), out.table.end(), [&](const SweepEntry& x) {
                                      return x.k == *out.best_k;
                                    })->score)) {
      out.best_k = k;
    }
    out.table.push_back(std::move(e));
  }
  return out;
}

}  // namespace futopic::coherence
