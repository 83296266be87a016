#pragma once

// Class-based TF-IDF topic representations.
//
//   W[t,c] = (c[t,c] / sum_t' c[t',c]) * ln(1 + A / f_t)
//   f_t = sum_c c[t,c],  A = (sum_{t,c} c[t,c]) / k
//
// Empty classes get zero vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "futopic/error.hpp"
#include "futopic/textprep.hpp"

namespace futopic::topics {

struct ClassTermMatrix {
  std::uint32_t k = 0;
  std::uint32_t v = 0;
  std::vector<std::uint64_t> counts;  // k x v, row-major
  std::vector<std::uint64_t> class_sizes;

  ClassTermMatrix() = default;
  ClassTermMatrix(std::uint32_t classes, std::uint32_t vocab)
      : k(classes), v(vocab), counts(static_cast<std::size_t>(classes) * vocab, 0), class_sizes(classes, 0) {}

  std::uint64_t& at(std::uint32_t c, TermId t) { return counts[static_cast<std::size_t>(c) * v + t]; }
  std::uint64_t at(std::uint32_t c, TermId t) const { return counts[static_cast<std::size_t>(c) * v + t]; }

  void add(std::uint32_t label, const BowDoc& doc) {
    if (label >= k) {
      throw InvalidArgument("label " + std::to_string(label) + " of document " + std::to_string(doc.doc_id) +
                            " is out of range for k = " + std::to_string(k));
    }
    ++class_sizes[label];
    for (const auto& [t, n] : doc.counts) {
      if (t >= v) throw InvalidArgument("term id out of range in document " + std::to_string(doc.doc_id));
      at(label, t) += n;
    }
  }

  std::uint64_t documents() const {
    std::uint64_t n = 0;
    for (auto s : class_sizes) n += s;
    return n;
  }

  std::vector<std::uint64_t> column_sums() const {
    std::vector<std::uint64_t> out(v, 0);
    for (std::uint32_t c = 0; c < k; ++c)
      for (TermId t = 0; t < v; ++t) out[t] += at(c, t);
    return out;
  }

  bool operator==(const ClassTermMatrix&) const = default;
};

// Streams BoW batches and accumulates per-class term counts. `label_of(doc_id)`
// returns std::optional<uint32_t>; a missing label is fatal.
template <typename Source, typename LabelFn>
ClassTermMatrix class_term_counts(Source& source, std::uint32_t k, std::uint32_t vocab_size, LabelFn&& label_of) {
  if (k == 0) throw InvalidArgument("class count must be at least 1");
  ClassTermMatrix m(k, vocab_size);
  std::vector<BowDoc> batch;
  while (source.next(batch)) {
    for (const auto& doc : batch) {
      const auto label = label_of(doc.doc_id);
      if (!label) throw Error("document " + std::to_string(doc.doc_id) + " has no label");
      m.add(*label, doc);
    }
  }
  return m;
}

struct TopicRepresentation {
  std::uint32_t topic_id = 0;
  std::uint64_t size = 0;
  std::vector<std::pair<TermId, double>> ctfidf;  // sparse, by term id
  std::vector<std::pair<TermId, double>> ranked;  // weight descending, ties by term id

  bool operator==(const TopicRepresentation&) const = default;
};

inline std::vector<std::pair<TermId, double>> rank_terms(std::vector<std::pair<TermId, double>> weights) {
  std::sort(weights.begin(), weights.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return weights;
}

inline std::vector<TopicRepresentation> ctfidf(const ClassTermMatrix& m) {
  const auto f = m.column_sums();
  std::uint64_t total = 0;
  for (auto x : f) total += x;
  if (total == 0) throw Error("class-term matrix has no counts; cannot weight an empty corpus");
  // A / f_t as one division of exact integers: scaling every count by the
  // same factor reproduces the weights bit for bit.
  std::vector<double> idf(m.v, 0.0);
  for (TermId t = 0; t < m.v; ++t) {
    if (f[t] > 0) idf[t] = std::log1p(static_cast<double>(total) / static_cast<double>(f[t] * m.k));
  }
  std::vector<TopicRepresentation> out(m.k);
  for (std::uint32_t c = 0; c < m.k; ++c) {
    auto& rep = out[c];
    rep.topic_id = c;
    rep.size = m.class_sizes[c];
    std::uint64_t row = 0;
    for (TermId t = 0; t < m.v; ++t) row += m.at(c, t);
    if (row == 0) continue;
    for (TermId t = 0; t < m.v; ++t) {
      if (const auto n = m.at(c, t); n > 0) {
        rep.ctfidf.emplace_back(t, static_cast<double>(n) / static_cast<double>(row) * idf[t]);
      }
    }
    std::vector<std::pair<TermId, double>> nonzero;
    for (const auto& e : rep.ctfidf) {
      if (e.second > 0.0) nonzero.push_back(e);
    }
    rep.ranked = rank_terms(std::move(nonzero));
  }
  return out;
}

inline std::vector<std::pair<TermId, double>> top_terms(const TopicRepresentation& rep, std::size_t n) {
  if (n == 0) throw InvalidArgument("n must be at least 1");
  return {rep.ranked.begin(), rep.ranked.begin() + static_cast<std::ptrdiff_t>(std::min(n, rep.ranked.size()))};
}

inline std::vector<double> dense_vector(const TopicRepresentation& rep, std::uint32_t v) {
  std::vector<double> out(v, 0.0);
  for (const auto& [t, w] : rep.ctfidf) out[t] = w;
  return out;
}

// Shared topics file: [{topic_id, size, terms: [[term, weight], ...]}, ...].
struct TopicTerms {
  std::uint32_t topic_id = 0;
  std::uint64_t size = 0;
  std::vector<std::pair<std::string, double>> terms;

  bool operator==(const TopicTerms&) const = default;
};

inline nlohmann::json topics_to_json(const std::vector<TopicTerms>& topics) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : topics) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [term, w] : t.terms) terms.push_back(nlohmann::json::array({term, w}));
    arr.push_back({{"topic_id", t.topic_id}, {"size", t.size}, {"terms", std::move(terms)}});
  }
  return arr;
}

inline std::vector<TopicTerms> topics_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("topics JSON must be an array");
  std::vector<TopicTerms> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("topic_id") || !e.contains("terms") || !e["terms"].is_array()) {
      throw FormatError("topics JSON entry needs topic_id and terms");
    }
    TopicTerms t;
    t.topic_id = e["topic_id"].get<std::uint32_t>();
    t.size = e.value("size", std::uint64_t{0});
    for (const auto& pair : e["terms"]) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_number()) {
        throw FormatError("topic terms must be [term, weight] pairs");
      }
      t.terms.emplace_back(pair[0].get<std::string>(), pair[1].get<double>());
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<TopicTerms> named_topics(const std::vector<TopicRepresentation>& reps, const Vocabulary& vocab,
                                            std::size_t n) {
  std::vector<TopicTerms> out;
  for (const auto& r : reps) {
    TopicTerms t{r.topic_id, r.size, {}};
    for (const auto& [id, w] : top_terms(r, n)) t.terms.emplace_back(vocab.term(id), w);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace futopic::topics
