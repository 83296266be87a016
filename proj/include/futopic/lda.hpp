#pragma once

// Online variational Bayes for LDA.
//
// Per document (E-step), with Elog terms computed from the current model:
//   phi_wk  ∝ exp(digamma(gamma_k)) * exp(digamma(lambda_kw) - digamma(sum_w lambda_kw))
//   gamma_k = alpha + sum_w n_w phi_wk
// Per mini-batch of B documents (M-step), with D the corpus size:
//   rho_t  = (tau0 + t)^-kappa
//   lambda = (1 - rho_t) lambda + rho_t (eta + D/B * sstats)
//
// Model file (little-endian):
//   "FSLD" | version u32 = 1 | K u32 | V u32 | alpha f64 | eta f64 | tau0 f64 |
//   kappa f64 | seed u64 | t u64 | D u64 | lambda K*V f64, row-major by topic

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "futopic/binio.hpp"
#include "futopic/error.hpp"
#include "futopic/parallel.hpp"
#include "futopic/special.hpp"
#include "futopic/textprep.hpp"

namespace futopic::lda {

struct Hyperparams {
  double alpha = 0.0;  // 0 selects 1/K
  double eta = 0.0;    // 0 selects 1/K
  double tau0 = 64.0;
  double kappa = 0.7;
};

struct EStepOptions {
  double tolerance = 1e-3;
  int max_iterations = 100;
};

class LdaModel {
 public:
  LdaModel() = default;

  // lambda drawn from Gamma(shape 100, scale 0.01) under a seeded generator.
  static LdaModel initialize(std::uint32_t k, std::uint32_t v, Hyperparams hp, std::uint64_t corpus_size,
                             std::uint64_t seed) {
    if (k < 1) throw InvalidArgument("K must be at least 1");
    if (v < 1) throw InvalidArgument("vocabulary must be non-empty");
    if (!(hp.kappa > 0.5 && hp.kappa <= 1.0)) throw InvalidArgument("kappa must lie in (0.5, 1]");
    if (!(hp.tau0 > 0.0)) throw InvalidArgument("tau0 must be positive");
    LdaModel m;
    m.k_ = k;
    m.v_ = v;
    m.alpha_ = hp.alpha > 0.0 ? hp.alpha : 1.0 / k;
    m.eta_ = hp.eta > 0.0 ? hp.eta : 1.0 / k;
    m.tau0_ = hp.tau0;
    m.kappa_ = hp.kappa;
    m.corpus_size_ = corpus_size;
    m.seed_ = seed;
    m.lambda_.resize(static_cast<std::size_t>(k) * v);
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(100.0, 0.01);
    for (auto& x : m.lambda_) x = gamma(rng);
    return m;
  }

  // Direct construction, used by tests and the loader.
  static LdaModel from_lambda(std::uint32_t k, std::uint32_t v, std::vector<double> lambda, double alpha, double eta,
                              double tau0 = 64.0, double kappa = 0.7, std::uint64_t corpus_size = 1,
                              std::uint64_t updates = 0, std::uint64_t seed = 0) {
    if (lambda.size() != static_cast<std::size_t>(k) * v) throw InvalidArgument("lambda must be K*V");
    for (double x : lambda) {
      if (!(x > 0.0) || !std::isfinite(x)) throw InvalidArgument("lambda entries must be positive and finite");
    }
    LdaModel m;
    m.k_ = k;
    m.v_ = v;
    m.lambda_ = std::move(lambda);
    m.alpha_ = alpha;
    m.eta_ = eta;
    m.tau0_ = tau0;
    m.kappa_ = kappa;
    m.corpus_size_ = corpus_size;
    m.updates_ = updates;
    m.seed_ = seed;
    return m;
  }

  std::uint32_t num_topics() const { return k_; }
  std::uint32_t vocab_size() const { return v_; }
  double alpha() const { return alpha_; }
  double eta() const { return eta_; }
  double tau0() const { return tau0_; }
  double kappa() const { return kappa_; }
  std::uint64_t updates_seen() const { return updates_; }
  std::uint64_t corpus_size() const { return corpus_size_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& lambda() const { return lambda_; }
  std::span<const double> topic_row(std::uint32_t k) const {
    return std::span<const double>(lambda_).subspan(static_cast<std::size_t>(k) * v_, v_);
  }

  // Bytes owned by the model; independent of how many documents were seen.
  std::size_t state_bytes() const { return sizeof(*this) + lambda_.capacity() * sizeof(double); }

  double learning_rate() const { return learning_rate(tau0_, kappa_, updates_); }
  static double learning_rate(double tau0, double kappa, std::uint64_t t) {
    return std::pow(tau0 + static_cast<double>(t), -kappa);
  }

  // sstats is K*V; batch_doc_count the number of documents behind it.
  void m_step(std::span<const double> sstats, std::uint64_t batch_doc_count) {
    if (batch_doc_count < 1) throw InvalidArgument("m_step needs at least one document");
    if (sstats.size() != lambda_.size()) throw InvalidArgument("sstats must be K*V");
    const double rho = learning_rate();
    const double scale = static_cast<double>(corpus_size_) / static_cast<double>(batch_doc_count);
    for (std::size_t i = 0; i < lambda_.size(); ++i) {
      lambda_[i] = (1.0 - rho) * lambda_[i] + rho * (eta_ + scale * sstats[i]);
    }
    ++updates_;
  }

  // exp(E[log beta_kw]) as a K*V row-major matrix.
  std::vector<double> exp_elog_beta() const {
    std::vector<double> out(lambda_.size());
    for (std::uint32_t k = 0; k < k_; ++k) {
      const auto row = topic_row(k);
      const double psi_sum = digamma(std::accumulate(row.begin(), row.end(), 0.0));
      for (std::uint32_t w = 0; w < v_; ++w) {
        out[static_cast<std::size_t>(k) * v_ + w] = std::exp(digamma(row[w]) - psi_sum);
      }
    }
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model " + path.string());
    out.write("FSLD", 4);
    binio::put_le<std::uint32_t>(out, 1);
    binio::put_le<std::uint32_t>(out, k_);
    binio::put_le<std::uint32_t>(out, v_);
    binio::put_f64(out, alpha_);
    binio::put_f64(out, eta_);
    binio::put_f64(out, tau0_);
    binio::put_f64(out, kappa_);
    binio::put_le<std::uint64_t>(out, seed_);
    binio::put_le<std::uint64_t>(out, updates_);
    binio::put_le<std::uint64_t>(out, corpus_size_);
    for (double x : lambda_) binio::put_f64(out, x);
    if (!out) throw IoError("failed writing model " + path.string());
  }

  static LdaModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    try {
      if (binio::get_bytes(in, 4, "magic") != "FSLD") throw FormatError("unsupported format");
      if (binio::get_le<std::uint32_t>(in, "version") != 1) throw FormatError("unsupported format");
      const auto k = binio::get_le<std::uint32_t>(in, "K");
      const auto v = binio::get_le<std::uint32_t>(in, "V");
      const double alpha = binio::get_f64(in, "alpha");
      const double eta = binio::get_f64(in, "eta");
      const double tau0 = binio::get_f64(in, "tau0");
      const double kappa = binio::get_f64(in, "kappa");
      const auto seed = binio::get_le<std::uint64_t>(in, "seed");
      const auto t = binio::get_le<std::uint64_t>(in, "t");
      const auto d = binio::get_le<std::uint64_t>(in, "D");
      std::vector<double> lambda(static_cast<std::size_t>(k) * v);
      for (auto& x : lambda) x = binio::get_f64(in, "lambda");
      if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes");
      return from_lambda(k, v, std::move(lambda), alpha, eta, tau0, kappa, d, t, seed);
    } catch (const Error& e) {
      throw FormatError("model " + path.string() + ": " + e.what());
    }
  }

  bool operator==(const LdaModel&) const = default;

 private:
  std::uint32_t k_ = 0;
  std::uint32_t v_ = 0;
  std::vector<double> lambda_;
  double alpha_ = 0.0;
  double eta_ = 0.0;
  double tau0_ = 64.0;
  double kappa_ = 0.7;
  std::uint64_t updates_ = 0;
  std::uint64_t corpus_size_ = 0;
  std::uint64_t seed_ = 0;
};

// Per-document E-step output. phi_counts holds n_w * phi_wk for the document's
// distinct terms, laid out K rows by term_ids.size() columns.
struct DocEStep {
  std::vector<double> gamma;
  std::vector<TermId> term_ids;
  std::vector<double> phi_counts;
  int iterations = 0;
};

inline DocEStep e_step_doc(std::span<const double> exp_elog_beta, std::uint32_t k_topics, std::uint32_t v,
                           double alpha, const BowDoc& bow, EStepOptions opts = {}) {
  DocEStep out;
  const std::size_t n = bow.counts.size();
  out.gamma.assign(k_topics, alpha);
  if (n == 0) return out;

  out.term_ids.resize(n);
  std::vector<double> cts(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (bow.counts[j].first >= v) throw InvalidArgument("document term id outside model vocabulary");
    out.term_ids[j] = bow.counts[j].first;
    cts[j] = bow.counts[j].second;
  }
  // Gathered K x n slice of exp(E[log beta]).
  std::vector<double> beta(k_topics * n);
  for (std::uint32_t k = 0; k < k_topics; ++k) {
    for (std::size_t j = 0; j < n; ++j) beta[k * n + j] = exp_elog_beta[static_cast<std::size_t>(k) * v + out.term_ids[j]];
  }

  std::vector<double> gamma(k_topics, 1.0);
  std::vector<double> exp_elog_theta(k_topics);
  auto refresh_theta = [&] {
    const double psi_sum = digamma(std::accumulate(gamma.begin(), gamma.end(), 0.0));
    for (std::uint32_t k = 0; k < k_topics; ++k) exp_elog_theta[k] = std::exp(digamma(gamma[k]) - psi_sum);
  };
  std::vector<double> ratio(n);
  auto refresh_ratio = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      double norm = 1e-100;
      for (std::uint32_t k = 0; k < k_topics; ++k) norm += exp_elog_theta[k] * beta[k * n + j];
      ratio[j] = cts[j] / norm;
    }
  };

  refresh_theta();
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    refresh_ratio();
    double change = 0.0;
    for (std::uint32_t k = 0; k < k_topics; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += ratio[j] * beta[k * n + j];
      const double next = alpha + exp_elog_theta[k] * dot;
      change += std::abs(next - gamma[k]);
      gamma[k] = next;
    }
    refresh_theta();
    if (change / k_topics < opts.tolerance) break;
  }

  refresh_ratio();
  out.phi_counts.resize(k_topics * n);
  for (std::uint32_t k = 0; k < k_topics; ++k) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = exp_elog_theta[k] * beta[k * n + j] * ratio[j];
      out.phi_counts[k * n + j] = c;
      total += c;
    }
    out.gamma[k] = alpha + total;
  }
  return out;
}

inline DocEStep e_step_doc(const LdaModel& model, const BowDoc& bow, EStepOptions opts = {}) {
  const auto eb = model.exp_elog_beta();
  return e_step_doc(eb, model.num_topics(), model.vocab_size(), model.alpha(), bow, opts);
}

struct EStepResult {
  std::vector<std::vector<double>> gamma;  // one K-vector per document
  std::vector<double> sstats;              // K*V
};

// Data-parallel E-step over a batch; per-document results are folded into
// sstats in document order so the sum is independent of the worker count.
inline EStepResult e_step_batch(const LdaModel& model, std::span<const double> exp_elog_beta,
                                std::span<const BowDoc> batch, Parallelism par, EStepOptions opts = {}) {
  std::vector<DocEStep> docs(batch.size());
  parallel_for(batch.size(), par, [&](std::size_t i) {
    docs[i] = e_step_doc(exp_elog_beta, model.num_topics(), model.vocab_size(), model.alpha(), batch[i], opts);
  });
  EStepResult result;
  const std::uint32_t v = model.vocab_size();
  result.sstats.assign(static_cast<std::size_t>(model.num_topics()) * v, 0.0);
  result.gamma.reserve(batch.size());
  for (auto& d : docs) {
    const std::size_t n = d.term_ids.size();
    for (std::uint32_t k = 0; k < model.num_topics(); ++k) {
      for (std::size_t j = 0; j < n; ++j) result.sstats[static_cast<std::size_t>(k) * v + d.term_ids[j]] += d.phi_counts[k * n + j];
    }
    result.gamma.push_back(std::move(d.gamma));
  }
  return result;
}

struct TrainOptions {
  std::uint32_t k = 15;
  Hyperparams hyper;
  std::size_t batch_size = 4096;
  std::uint32_t passes = 1;
  std::uint64_t seed = 42;
  EStepOptions estep;
  Parallelism parallelism;
};

struct FitReport {
  std::uint64_t documents_seen = 0;
  std::uint64_t updates = 0;
  std::size_t model_bytes = 0;
  std::size_t peak_batch_bytes = 0;  // batch documents plus per-document E-step buffers
};

inline std::size_t batch_bytes(std::span<const BowDoc> batch, std::uint32_t k) {
  std::size_t bytes = 0;
  for (const auto& d : batch) {
    bytes += sizeof(BowDoc) + d.counts.size() * sizeof(d.counts[0]);
    bytes += sizeof(DocEStep) + k * sizeof(double) + d.counts.size() * (sizeof(TermId) + k * sizeof(double));
  }
  return bytes;
}

// Source concept: `bool next(std::vector<BowDoc>& batch)` fills up to the
// source's batch size and returns false when a pass is finished;
// `void rewind()` restarts the pass in the same order.
template <typename Source>
concept BowBatchSource = requires(Source& s, std::vector<BowDoc>& batch) {
  { s.next(batch) } -> std::convertible_to<bool>;
  s.rewind();
};

// Trains a fresh model over `passes` sweeps of the source. Memory is the
// K*V model, one K*V sstats buffer and one batch, whatever the corpus length.
template <BowBatchSource Source>
LdaModel fit_stream(Source& source, std::uint32_t vocab_size, std::uint64_t corpus_size, const TrainOptions& opts,
                    FitReport* report = nullptr) {
  if (corpus_size == 0) throw InvalidArgument("cannot train on an empty corpus");
  if (opts.passes < 1) throw InvalidArgument("passes must be at least 1");
  auto model = LdaModel::initialize(opts.k, vocab_size, opts.hyper, corpus_size, opts.seed);
  FitReport rep;
  std::vector<BowDoc> batch;
  for (std::uint32_t pass = 0; pass < opts.passes; ++pass) {
    if (pass > 0) source.rewind();
    while (source.next(batch)) {
      if (batch.empty()) continue;
      const auto eb = model.exp_elog_beta();
      auto es = e_step_batch(model, eb, batch, opts.parallelism, opts.estep);
      model.m_step(es.sstats, batch.size());
      rep.documents_seen += batch.size();
      rep.peak_batch_bytes = std::max(rep.peak_batch_bytes, batch_bytes(batch, opts.k) + es.sstats.size() * sizeof(double));
    }
  }
  if (rep.documents_seen == 0) throw InvalidArgument("cannot train on an empty corpus");
  rep.updates = model.updates_seen();
  rep.model_bytes = model.state_bytes();
  if (report != nullptr) *report = rep;
  return model;
}

struct TermWeight {
  TermId term = 0;
  double weight = 0.0;
  bool operator==(const TermWeight&) const = default;
};

// Terms of one topic ranked by normalized lambda, ties by ascending term id.
inline std::vector<TermWeight> topic_top_terms(const LdaModel& model, std::uint32_t topic, std::size_t n) {
  if (topic >= model.num_topics()) throw InvalidArgument("topic id out of range");
  const auto row = model.topic_row(topic);
  const double total = std::accumulate(row.begin(), row.end(), 0.0);
  std::vector<TermWeight> all(row.size());
  for (std::size_t w = 0; w < row.size(); ++w) all[w] = {static_cast<TermId>(w), row[w] / total};
  n = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    [](const TermWeight& a, const TermWeight& b) {
                      return a.weight != b.weight ? a.weight > b.weight : a.term < b.term;
                    });
  all.resize(n);
  return all;
}

inline std::vector<double> normalize_gamma(const std::vector<double>& gamma) {
  const double total = std::accumulate(gamma.begin(), gamma.end(), 0.0);
  std::vector<double> theta(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) theta[k] = gamma[k] / total;
  return theta;
}

// Holds exp(E[log beta]) so repeated inference does not recompute it.
class Inferencer {
 public:
  explicit Inferencer(const LdaModel& model, EStepOptions opts = {})
      : model_(&model), exp_elog_beta_(model.exp_elog_beta()), opts_(opts) {}

  std::vector<double> theta(const BowDoc& bow) const {
    return normalize_gamma(
        e_step_doc(exp_elog_beta_, model_->num_topics(), model_->vocab_size(), model_->alpha(), bow, opts_).gamma);
  }

 private:
  const LdaModel* model_;
  std::vector<double> exp_elog_beta_;
  EStepOptions opts_;
};

inline std::vector<double> infer_theta(const LdaModel& model, const BowDoc& bow, EStepOptions opts = {}) {
  return normalize_gamma(e_step_doc(model, bow, opts).gamma);
}

inline nlohmann::json summary_json(const LdaModel& model, const Vocabulary* vocab, std::size_t top_n = 10) {
  nlohmann::json topics = nlohmann::json::array();
  for (std::uint32_t k = 0; k < model.num_topics(); ++k) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& tw : topic_top_terms(model, k, top_n)) {
      terms.push_back({vocab != nullptr ? vocab->term(tw.term) : std::to_string(tw.term), tw.weight});
    }
    topics.push_back({{"topic_id", k}, {"terms", std::move(terms)}});
  }
  return {{"schema_version", 1},
          {"K", model.num_topics()},
          {"V", model.vocab_size()},
          {"alpha", model.alpha()},
          {"eta", model.eta()},
          {"tau0", model.tau0()},
          {"kappa", model.kappa()},
          {"updates_seen", model.updates_seen()},
          {"corpus_size", model.corpus_size()},
          {"seed", model.seed()},
          {"topics", std::move(topics)}};
}

}  // namespace futopic::lda
