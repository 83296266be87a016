#pragma once

// Streaming dimensionality reduction and clustering for embedding vectors:
// incremental PCA (mean-corrected SVD recurrence) followed by mini-batch
// k-means with k-means++ seeding on the first batch.
//
// Cluster model file, little-endian:
//   "FSCL" | version u32 = 1 | dim u32 | n_components u32 | k u32 | normalize u8 |
//   seed u64 | n_seen u64 | mean f64[dim] | singular f64[nc] | components f64[nc*dim] |
//   counts u64[k] | centroids f64[k*nc]

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "futopic/binio.hpp"
#include "futopic/corpus.hpp"
#include "futopic/embedstore.hpp"
#include "futopic/error.hpp"
#include "futopic/labels.hpp"
#include "futopic/parallel.hpp"

namespace futopic::cluster {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct PcaState {
  std::uint32_t n_components = 5;
  std::uint32_t dim = 0;
  std::uint64_t n_seen = 0;
  Vector mean;
  Matrix components;  // rows are orthonormal directions; fewer than n_components until enough data
  Vector singular_values;

  PcaState() = default;
  PcaState(std::uint32_t n_comp, std::uint32_t d) : n_components(n_comp), dim(d) {
    if (n_comp == 0) throw InvalidArgument("n_components must be at least 1");
    if (d == 0) throw InvalidArgument("dimension must be at least 1");
    if (n_comp > d) {
      throw InvalidArgument("n_components (" + std::to_string(n_comp) + ") exceeds dimension (" +
                            std::to_string(d) + ")");
    }
    mean = Vector::Zero(d);
  }

  bool fitted() const { return n_seen >= n_components && components.rows() == n_components; }

  std::size_t state_bytes() const {
    return sizeof(PcaState) + sizeof(double) * (static_cast<std::size_t>(dim) * (n_components + 1) + n_components);
  }

  bool operator==(const PcaState& o) const {
    return n_components == o.n_components && dim == o.dim && n_seen == o.n_seen && mean == o.mean &&
           components == o.components && singular_values == o.singular_values;
  }
};

namespace detail {

// Deterministic sign: the largest-magnitude entry of each component is positive.
inline void flip_signs(Matrix& v) {
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (std::abs(v(r, c)) > mag) {
        mag = std::abs(v(r, c));
        best = c;
      }
    }
    if (v(r, best) < 0) v.row(r) *= -1.0;
  }
}

inline double canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline void pca_partial_fit(PcaState& s, const Matrix& batch) {
  if (batch.rows() == 0) throw InvalidArgument("PCA batch must contain at least one row");
  if (batch.cols() != s.dim) {
    throw InvalidArgument("PCA batch has dimension " + std::to_string(batch.cols()) + ", state expects " +
                          std::to_string(s.dim));
  }
  const double n_old = static_cast<double>(s.n_seen);
  const double n_b = static_cast<double>(batch.rows());
  const double n_total = n_old + n_b;
  const Vector batch_mean = batch.colwise().mean().transpose();

  Matrix stacked;
  if (s.n_seen == 0) {
    stacked = batch.rowwise() - batch_mean.transpose();
  } else {
    const Eigen::Index k = s.components.rows();
    stacked.resize(k + batch.rows() + 1, s.dim);
    stacked.topRows(k) = s.singular_values.asDiagonal() * s.components;
    stacked.middleRows(k, batch.rows()) = batch.rowwise() - batch_mean.transpose();
    stacked.bottomRows(1) = (std::sqrt(n_old * n_b / n_total) * (s.mean - batch_mean)).transpose();
  }
  Eigen::BDCSVD<Matrix> svd(stacked, Eigen::ComputeThinV);
  const Eigen::Index keep = std::min<Eigen::Index>(s.n_components, svd.singularValues().size());
  Matrix v = svd.matrixV().leftCols(keep).transpose();
  detail::flip_signs(v);
  s.components = std::move(v);
  s.singular_values = svd.singularValues().head(keep);
  s.mean = (n_old * s.mean + n_b * batch_mean) / n_total;
  s.n_seen += static_cast<std::uint64_t>(batch.rows());
}

inline Matrix pca_transform(const PcaState& s, const Matrix& batch) {
  if (!s.fitted()) {
    throw Error("PCA state is unfitted: seen " + std::to_string(s.n_seen) + " rows, need at least " +
                std::to_string(s.n_components));
  }
  if (batch.cols() != s.dim) throw InvalidArgument("PCA transform dimension mismatch");
  return (batch.rowwise() - s.mean.transpose()) * s.components.transpose();
}

struct KMeansState {
  std::uint32_t k = 0;
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;
  bool initialized = false;
  Matrix centroids;
  std::vector<std::uint64_t> counts;

  KMeansState() = default;
  KMeansState(std::uint32_t clusters, std::uint32_t d, std::uint64_t s) : k(clusters), dim(d), seed(s) {
    if (clusters == 0) throw InvalidArgument("k must be at least 1");
    centroids = Matrix::Zero(clusters, d);
    counts.assign(clusters, 0);
  }

  std::size_t state_bytes() const {
    return sizeof(KMeansState) + static_cast<std::size_t>(k) * (dim * sizeof(double) + sizeof(std::uint64_t));
  }

  bool operator==(const KMeansState& o) const {
    return k == o.k && dim == o.dim && seed == o.seed && initialized == o.initialized &&
           centroids == o.centroids && counts == o.counts;
  }
};

inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Nearest centroid per row; ties go to the lowest centroid id.
inline std::vector<std::uint32_t> kmeans_assign(const KMeansState& s, const Matrix& batch, Parallelism par = {}) {
  if (!s.initialized) throw Error("k-means state is not initialized");
  if (batch.cols() != s.dim) throw InvalidArgument("k-means batch dimension mismatch");
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(batch.rows()));
  parallel_for(labels.size(), par, [&](std::size_t i) {
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < s.k; ++c) {
      const double d = squared_distance(batch, static_cast<Eigen::Index>(i), s.centroids, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = best;
  });
  return labels;
}

inline double inertia(const KMeansState& s, const Matrix& batch, Parallelism par = {}) {
  const auto labels = kmeans_assign(s, batch, par);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total += squared_distance(batch, static_cast<Eigen::Index>(i), s.centroids, labels[i]);
  }
  return total;
}

// k-means++: first centre uniform, then proportional to squared distance.
inline void kmeans_seed(KMeansState& s, const Matrix& batch) {
  if (batch.rows() < static_cast<Eigen::Index>(s.k)) {
    throw InvalidArgument("first batch must seed k centroids: got " + std::to_string(batch.rows()) +
                          " rows for k = " + std::to_string(s.k));
  }
  std::mt19937_64 rng(s.seed);
  const auto n = static_cast<std::size_t>(batch.rows());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t pick = static_cast<std::size_t>(detail::canonical(rng) * static_cast<double>(n));
  for (std::uint32_t c = 0; c < s.k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double x : d2) total += x;
      if (total > 0.0) {
        const double target = detail::canonical(rng) * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (d2[i] > 0.0 && acc > target) {
            pick = i;
            break;
          }
        }
        if (pick == n) {
          for (std::size_t i = n; i-- > 0;) {
            if (d2[i] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // every remaining point coincides with a chosen centre
        pick = static_cast<std::size_t>(std::find(taken.begin(), taken.end(), false) - taken.begin());
      }
    }
    taken[pick] = true;
    s.centroids.row(c) = batch.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(batch, static_cast<Eigen::Index>(i), s.centroids, c));
    }
  }
  s.initialized = true;
}

// Mini-batch step: assign against the current centroids, then move each
// assigned centroid toward its points with per-centroid rate 1/count.
inline void kmeans_partial_fit(KMeansState& s, const Matrix& batch, Parallelism par = {}) {
  if (batch.cols() != s.dim) throw InvalidArgument("k-means batch dimension mismatch");
  if (batch.rows() == 0) return;
  if (!s.initialized) kmeans_seed(s, batch);
  const auto labels = kmeans_assign(s, batch, par);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = labels[i];
    ++s.counts[c];
    s.centroids.row(c) += (batch.row(static_cast<Eigen::Index>(i)) - s.centroids.row(c)) / static_cast<double>(s.counts[c]);
  }
}

struct ClusterModel {
  PcaState pca;
  KMeansState kmeans;
  bool normalize = false;

  std::size_t state_bytes() const { return pca.state_bytes() + kmeans.state_bytes(); }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model " + path.string());
    out.write("FSCL", 4);
    binio::put_le<std::uint32_t>(out, 1);
    binio::put_le<std::uint32_t>(out, pca.dim);
    binio::put_le<std::uint32_t>(out, pca.n_components);
    binio::put_le<std::uint32_t>(out, kmeans.k);
    binio::put_le<std::uint8_t>(out, normalize ? 1 : 0);
    binio::put_le<std::uint64_t>(out, kmeans.seed);
    binio::put_le<std::uint64_t>(out, pca.n_seen);
    for (Eigen::Index i = 0; i < pca.mean.size(); ++i) binio::put_f64(out, pca.mean[i]);
    for (Eigen::Index i = 0; i < pca.singular_values.size(); ++i) binio::put_f64(out, pca.singular_values[i]);
    for (Eigen::Index r = 0; r < pca.components.rows(); ++r)
      for (Eigen::Index c = 0; c < pca.components.cols(); ++c) binio::put_f64(out, pca.components(r, c));
    for (auto n : kmeans.counts) binio::put_le<std::uint64_t>(out, n);
    for (Eigen::Index r = 0; r < kmeans.centroids.rows(); ++r)
      for (Eigen::Index c = 0; c < kmeans.centroids.cols(); ++c) binio::put_f64(out, kmeans.centroids(r, c));
    if (!out) throw IoError("failed writing model " + path.string());
  }

  static ClusterModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    try {
      if (binio::get_bytes(in, 4, "magic") != "FSCL") throw FormatError("unsupported format");
      if (binio::get_le<std::uint32_t>(in, "version") != 1) throw FormatError("unsupported format");
      const auto dim = binio::get_le<std::uint32_t>(in, "dim");
      const auto nc = binio::get_le<std::uint32_t>(in, "n_components");
      const auto k = binio::get_le<std::uint32_t>(in, "k");
      ClusterModel m;
      m.normalize = binio::get_le<std::uint8_t>(in, "normalize") != 0;
      const auto seed = binio::get_le<std::uint64_t>(in, "seed");
      m.pca = PcaState(nc, dim);
      m.kmeans = KMeansState(k, nc, seed);
      m.kmeans.initialized = true;
      m.pca.n_seen = binio::get_le<std::uint64_t>(in, "n_seen");
      for (Eigen::Index i = 0; i < dim; ++i) m.pca.mean[i] = binio::get_f64(in, "mean");
      m.pca.singular_values.resize(nc);
      for (Eigen::Index i = 0; i < nc; ++i) m.pca.singular_values[i] = binio::get_f64(in, "singular value");
      m.pca.components.resize(nc, dim);
      for (Eigen::Index r = 0; r < nc; ++r)
        for (Eigen::Index c = 0; c < dim; ++c) m.pca.components(r, c) = binio::get_f64(in, "component");
      for (auto& n : m.kmeans.counts) n = binio::get_le<std::uint64_t>(in, "count");
      for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < nc; ++c) m.kmeans.centroids(r, c) = binio::get_f64(in, "centroid");
      if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes");
      return m;
    } catch (const Error& e) {
      throw FormatError("model " + path.string() + ": " + e.what());
    }
  }

  bool operator==(const ClusterModel&) const = default;
};

struct PipelineOptions {
  std::uint32_t k = 100;
  std::uint32_t n_components = 5;
  std::uint64_t seed = 42;
  std::size_t batch_size = 4096;
  std::uint32_t epochs = 1;
  bool normalize = false;
  Parallelism parallelism;
};

struct PipelineReport {
  std::uint64_t documents = 0;
  std::size_t model_bytes = 0;
  std::size_t peak_batch_bytes = 0;
  bool used_index = false;
  std::vector<std::uint64_t> label_counts;

  nlohmann::json to_json() const {
    return {{"documents", documents}, {"model_bytes", model_bytes}, {"peak_batch_bytes", peak_batch_bytes},
            {"used_index", used_index}, {"label_counts", label_counts}};
  }
};

namespace detail {

inline void to_row(Matrix& m, Eigen::Index r, const std::vector<float>& v, bool normalize) {
  double norm = 1.0;
  if (normalize) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    norm = sq > 0.0 ? std::sqrt(sq) : 1.0;
  }
  for (std::size_t d = 0; d < v.size(); ++d) m(r, static_cast<Eigen::Index>(d)) = v[d] / norm;
}

// Fills up to batch_size rows from the reader; returns the row count.
inline Eigen::Index read_batch(embed::EmbeddingReader& reader, std::size_t batch_size, bool normalize, Matrix& out,
                               std::vector<std::uint64_t>* ids = nullptr) {
  out.resize(static_cast<Eigen::Index>(batch_size), reader.dim());
  if (ids) ids->clear();
  embed::EmbeddingRecord rec;
  Eigen::Index rows = 0;
  while (rows < static_cast<Eigen::Index>(batch_size) && reader.next(rec)) {
    to_row(out, rows, rec.vector, normalize);
    if (ids) ids->push_back(rec.tweet_id);
    ++rows;
  }
  out.conservativeResize(rows, Eigen::NoChange);
  return rows;
}

}  // namespace detail

// Two streaming fit phases over the embedding file (PCA, then PCA-transform +
// k-means for each epoch) and a labeling pass in corpus order. The embedding
// file must be aligned with the corpus; out-of-order files are joined through
// an on-disk id index.
inline ClusterModel fit_pipeline(const CorpusStore& store, const std::filesystem::path& embeddings,
                                 const PipelineOptions& opts, const std::function<void(const LabelEntry&)>& sink,
                                 PipelineReport* report = nullptr) {
  if (opts.batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  if (opts.epochs == 0) throw InvalidArgument("epochs must be at least 1");
  const auto alignment = embed::validate_alignment(store, embeddings);
  if (!alignment.aligned()) {
    throw Error("embedding file " + embeddings.string() + " is not aligned with the corpus: " +
                alignment.to_json().dump());
  }
  embed::EmbeddingReader reader(embeddings);
  if (reader.count() < opts.k) {
    throw InvalidArgument("k = " + std::to_string(opts.k) + " exceeds the number of documents (" +
                          std::to_string(reader.count()) + ")");
  }
  ClusterModel model;
  model.normalize = opts.normalize;
  model.pca = PcaState(opts.n_components, reader.dim());
  model.kmeans = KMeansState(opts.k, opts.n_components, opts.seed);
  PipelineReport rep;
  rep.documents = reader.count();
  Matrix batch;
  auto track = [&](const Matrix& m) {
    rep.peak_batch_bytes = std::max<std::size_t>(rep.peak_batch_bytes, static_cast<std::size_t>(m.size()) * sizeof(double));
  };

  while (detail::read_batch(reader, opts.batch_size, opts.normalize, batch) > 0) {
    track(batch);
    pca_partial_fit(model.pca, batch);
  }
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    reader.rewind();
    while (detail::read_batch(reader, opts.batch_size, opts.normalize, batch) > 0) {
      track(batch);
      kmeans_partial_fit(model.kmeans, pca_transform(model.pca, batch), opts.parallelism);
    }
  }

  rep.label_counts.assign(opts.k, 0);
  std::vector<std::uint64_t> ids;
  if (alignment.ordered) {
    reader.rewind();
    while (detail::read_batch(reader, opts.batch_size, opts.normalize, batch, &ids) > 0) {
      const auto lab = kmeans_assign(model.kmeans, pca_transform(model.pca, batch), opts.parallelism);
      for (std::size_t i = 0; i < lab.size(); ++i) {
        sink({ids[i], lab[i]});
        ++rep.label_counts[lab[i]];
      }
    }
  } else {
    rep.used_index = true;
    const auto idx_path = embed::EmbeddingIndex::default_path(embeddings);
    embed::EmbeddingIndex::build(embeddings, idx_path);
    embed::EmbeddingIndex index(idx_path);
    auto corpus = store.reader();
    std::vector<TweetRecord> records;
    embed::EmbeddingRecord rec;
    while (corpus.next_batch(opts.batch_size, records)) {
      batch.resize(static_cast<Eigen::Index>(records.size()), reader.dim());
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto pos = index.find(records[i].id);
        if (!pos) throw Error("no embedding for document " + std::to_string(records[i].id));
        reader.seek(*pos);
        reader.next(rec);
        detail::to_row(batch, static_cast<Eigen::Index>(i), rec.vector, opts.normalize);
      }
      track(batch);
      const auto lab = kmeans_assign(model.kmeans, pca_transform(model.pca, batch), opts.parallelism);
      for (std::size_t i = 0; i < lab.size(); ++i) {
        sink({records[i].id, lab[i]});
        ++rep.label_counts[lab[i]];
      }
    }
  }
  rep.model_bytes = model.state_bytes();
  if (report) *report = rep;
  return model;
}

inline nlohmann::json labels_summary(const ClusterModel& model, const PipelineReport& rep) {
  nlohmann::json sv = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.pca.singular_values.size(); ++i) sv.push_back(model.pca.singular_values[i]);
  return {{"schema_version", 1},
          {"k", model.kmeans.k},
          {"n_components", model.pca.n_components},
          {"dim", model.pca.dim},
          {"normalize", model.normalize},
          {"seed", model.kmeans.seed},
          {"documents", rep.documents},
          {"label_counts", rep.label_counts},
          {"singular_values", std::move(sv)}};
}

}  // namespace futopic::cluster
