#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

#include "futopic/cluster.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace futopic;
using namespace futopic::cluster;
using futopic::testing::TempDir;
using namespace futopic::oracle;

namespace {

Matrix to_matrix(const std::vector<std::vector<float>>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v[0].size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j];
  return m;
}

}  // namespace

TEST(Pca, IdenticalPointsHaveZeroVariance) {
  Matrix x(10, 3);
  x.rowwise() = Eigen::RowVector3d(1.5, -2.0, 4.0);
  PcaState s(2, 3);
  pca_partial_fit(s, x.topRows(4));
  pca_partial_fit(s, x.bottomRows(6));
  EXPECT_NEAR(s.singular_values.maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((s.mean - Eigen::Vector3d(1.5, -2.0, 4.0)).norm(), 0.0, 1e-12);
}

TEST(Pca, LineDirectionRecovered) {
  Matrix x(50, 2);
  for (int i = 0; i < 50; ++i) x.row(i) << i - 20.0, 2.0 * (i - 20.0);
  const auto s = fit_incremental(x, 1, 7);
  const Eigen::RowVector2d expected = Eigen::RowVector2d(1.0, 2.0) / std::sqrt(5.0);
  EXPECT_NEAR((s.components.row(0) - expected).norm(), 0.0, 1e-6);
}

TEST(Pca, IncrementalMatchesBatchSubspace) {
  const Matrix x = correlated_gaussian(1000, 20, 7);
  const auto s = fit_incremental(x, 5, 100);
  const Matrix ref = batch_components(x, 5);
  EXPECT_LE(max_principal_angle_deg(s.components, ref), 5.0);
  const Vector batch_mean = x.colwise().mean().transpose();
  EXPECT_NEAR((s.mean - batch_mean).norm(), 0.0, 1e-9);
  const double opt = reconstruction_error(x, batch_mean, ref);
  EXPECT_LE(reconstruction_error(x, s.mean, s.components), 1.05 * opt);
}

TEST(Pca, ComponentsStayOrthonormalAcrossRandomBatchSequences) {
  std::mt19937 rng(9);
  const Matrix x = correlated_gaussian(600, 12, 3);
  for (int round = 0; round < 10; ++round) {
    PcaState s(4, 12);
    Eigen::Index r = 0;
    while (r < x.rows()) {
      const auto b = std::min<Eigen::Index>(std::uniform_int_distribution<int>(1, 80)(rng), x.rows() - r);
      pca_partial_fit(s, x.middleRows(r, b));
      r += b;
      const Matrix gram = s.components * s.components.transpose();
      EXPECT_NEAR((gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 0.0, 1e-6);
      for (Eigen::Index i = 1; i < s.singular_values.size(); ++i) {
        EXPECT_LE(s.singular_values[i], s.singular_values[i - 1]);
      }
    }
    EXPECT_EQ(s.n_seen, 600u);
  }
}

TEST(Pca, TransformMeanIsZero) {
  const Matrix x = correlated_gaussian(200, 6, 1);
  const auto s = fit_incremental(x, 3, 50);
  const Matrix m = s.mean.transpose();
  EXPECT_NEAR(pca_transform(s, m).norm(), 0.0, 1e-12);
}

TEST(Pca, FullRankTransformPreservesDistances) {
  const Matrix x = correlated_gaussian(120, 5, 2);
  const auto s = fit_incremental(x, 5, 40);
  const Matrix y = pca_transform(s, x);
  for (int i = 0; i < 20; ++i) {
    for (int j = i + 1; j < 20; ++j) {
      EXPECT_NEAR((x.row(i) - x.row(j)).norm(), (y.row(i) - y.row(j)).norm(), 1e-9);
    }
  }
}

TEST(Pca, ProjectedVarianceNonIncreasing) {
  const Matrix x = correlated_gaussian(1000, 10, 4);
  const auto s = fit_incremental(x, 5, 128);
  const Matrix y = pca_transform(s, x);
  const Matrix centered = y.rowwise() - y.colwise().mean();
  for (Eigen::Index c = 1; c < y.cols(); ++c) {
    EXPECT_LE(centered.col(c).squaredNorm(), centered.col(c - 1).squaredNorm());
  }
}

TEST(Pca, ErrorsAndUnfittedState) {
  PcaState s(3, 4);
  EXPECT_THROW(pca_transform(s, Matrix::Zero(1, 4)), Error);
  pca_partial_fit(s, Matrix::Random(2, 4));
  EXPECT_FALSE(s.fitted());
  EXPECT_THROW(pca_transform(s, Matrix::Zero(1, 4)), Error);
  pca_partial_fit(s, Matrix::Random(3, 4));
  EXPECT_TRUE(s.fitted());
  EXPECT_THROW(pca_partial_fit(s, Matrix::Zero(2, 5)), InvalidArgument);
  EXPECT_THROW(PcaState(5, 4), InvalidArgument);
}

TEST(KMeans, SingleClusterIsRunningMean) {
  const Matrix x = correlated_gaussian(300, 3, 5);
  KMeansState s(1, 3, 1);
  for (Eigen::Index r = 0; r < x.rows(); r += 64) kmeans_partial_fit(s, x.middleRows(r, std::min<Eigen::Index>(64, x.rows() - r)));
  EXPECT_NEAR((s.centroids.row(0) - x.colwise().mean()).norm(), 0.0, 1e-9);
  EXPECT_EQ(s.counts[0], 300u);
}

TEST(KMeans, BlobPurityAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto b = three_blobs(seed);
    const Matrix x = to_matrix(b.vectors);
    KMeansState s(3, static_cast<std::uint32_t>(x.cols()), seed);
    for (Eigen::Index r = 0; r < x.rows(); r += 100) kmeans_partial_fit(s, x.middleRows(r, 100));
    const auto labels = kmeans_assign(s, x);
    EXPECT_GE(futopic::testing::purity(labels, b.truth, 3, 3), 0.99) << "seed " << seed;
  }
}

TEST(KMeans, DeterministicForSeedAndStream) {
  const Matrix x = to_matrix(three_blobs(3).vectors);
  KMeansState a(3, 8, 77), b(3, 8, 77);
  for (Eigen::Index r = 0; r < x.rows(); r += 50) {
    kmeans_partial_fit(a, x.middleRows(r, 50), Parallelism{1});
    kmeans_partial_fit(b, x.middleRows(r, 50), Parallelism{8});
  }
  EXPECT_EQ(a, b);
}

TEST(KMeans, AssignExactAndTie) {
  KMeansState s(3, 2, 0);
  s.initialized = true;
  s.centroids << 0, 0, 2, 0, 5, 5;
  Matrix pts(2, 2);
  pts << 5, 5, 1, 0;
  EXPECT_EQ(kmeans_assign(s, pts), (std::vector<std::uint32_t>{2, 0}));
}

TEST(KMeans, AssignmentMinimizesInertiaOverAllLabelings) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int round = 0; round < 20; ++round) {
    KMeansState s(3, 2, 0);
    s.initialized = true;
    for (Eigen::Index i = 0; i < 3; ++i) s.centroids.row(i) << n01(rng), n01(rng);
    Matrix pts(6, 2);
    for (Eigen::Index i = 0; i < 6; ++i) pts.row(i) << n01(rng), n01(rng);
    double best = std::numeric_limits<double>::infinity();
    for (int code = 0; code < 729; ++code) {
      double total = 0.0;
      int c = code;
      for (Eigen::Index i = 0; i < 6; ++i, c /= 3) total += squared_distance(pts, i, s.centroids, c % 3);
      best = std::min(best, total);
    }
    EXPECT_NEAR(inertia(s, pts), best, 1e-12);
  }
}

TEST(KMeans, FirstBatchSmallerThanKIsFatal) {
  KMeansState s(5, 2, 0);
  try {
    kmeans_partial_fit(s, Matrix::Random(3, 2));
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("first batch must seed k centroids"), std::string::npos);
  }
}

TEST(KMeans, InertiaNonIncreasingAcrossEpochs) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  Matrix x(2000, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double cx = static_cast<double>(i % 6);
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = n01(rng) + (j == 0 ? 3 * cx : 0.0);
  }
  const Matrix held_out = x.topRows(400);
  KMeansState s(6, 4, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < 5; ++epoch) {
    for (Eigen::Index r = 400; r < x.rows(); r += 200) kmeans_partial_fit(s, x.middleRows(r, 200));
    const double cur = inertia(s, held_out);
    EXPECT_LE(cur, prev * 1.01) << "epoch " << epoch;
    prev = cur;
  }
}

TEST(ClusterPipeline, TotalityAndModelRoundTrip) {
  TempDir dir("pipe");
  std::vector<std::vector<double>> centers(5, std::vector<double>(6, 0.0));
  for (int c = 0; c < 5; ++c) centers[c][c] = 6.0;
  const auto b = futopic::testing::gaussian_blobs(centers, 40, 0.2, 3);
  write_matching_corpus(b.ids, dir / "corpus");
  write_blob_embeddings(b, dir / "emb.fsem");
  const auto store = CorpusStore::open(dir / "corpus");
  PipelineOptions opts;
  opts.k = 5;
  opts.n_components = 5;
  opts.batch_size = 64;
  LabelWriter writer(dir / "labels.bin");
  PipelineReport rep;
  const auto model = fit_pipeline(store, dir / "emb.fsem", opts, std::ref(writer), &rep);
  writer.close();
  const auto labels = read_labels(dir / "labels.bin");
  ASSERT_EQ(labels.size(), 200u);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(labels[i].doc_id, b.ids[i]);
    EXPECT_LT(labels[i].label, 5u);
  }
  std::vector<std::uint32_t> lab;
  for (const auto& e : labels) lab.push_back(e.label);
  EXPECT_GE(futopic::testing::purity(lab, b.truth, 5, 5), 0.99);
  EXPECT_FALSE(rep.used_index);

  model.save(dir / "model.fscl");
  EXPECT_EQ(ClusterModel::load(dir / "model.fscl"), model);
  futopic::testing::write_file(dir / "bad.fscl", "FSCL");
  EXPECT_THROW(ClusterModel::load(dir / "bad.fscl"), FormatError);
}

TEST(ClusterPipeline, MisorderedEmbeddingsLabeledInCorpusOrder) {
  TempDir dir("pipe-order");
  auto b = three_blobs(4);
  write_matching_corpus(b.ids, dir / "corpus");
  auto shuffled = b;
  std::reverse(shuffled.ids.begin(), shuffled.ids.end());
  std::reverse(shuffled.vectors.begin(), shuffled.vectors.end());
  write_blob_embeddings(shuffled, dir / "emb.fsem");
  const auto store = CorpusStore::open(dir / "corpus");
  PipelineOptions opts;
  opts.k = 3;
  opts.n_components = 3;
  opts.batch_size = 128;
  std::vector<LabelEntry> labels;
  PipelineReport rep;
  fit_pipeline(store, dir / "emb.fsem", opts, [&](const LabelEntry& e) { labels.push_back(e); }, &rep);
  EXPECT_TRUE(rep.used_index);
  ASSERT_EQ(labels.size(), b.ids.size());
  std::vector<std::uint32_t> lab;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(labels[i].doc_id, b.ids[i]);
    lab.push_back(labels[i].label);
  }
  EXPECT_GE(futopic::testing::purity(lab, b.truth, 3, 3), 0.99);
}

TEST(ClusterPipeline, MisalignedEmbeddingsRefused) {
  TempDir dir("pipe-bad");
  auto b = three_blobs(5);
  write_matching_corpus(b.ids, dir / "corpus");
  b.ids.pop_back();
  b.vectors.pop_back();
  write_blob_embeddings(b, dir / "emb.fsem");
  const auto store = CorpusStore::open(dir / "corpus");
  PipelineOptions opts;
  opts.k = 3;
  opts.n_components = 3;
  EXPECT_THROW(fit_pipeline(store, dir / "emb.fsem", opts, [](const LabelEntry&) {}), Error);
}

TEST(ClusterPipeline, StateBytesIndependentOfCorpusSize) {
  std::vector<std::size_t> model_bytes, batch_bytes;
  for (std::size_t per_blob : {100, 1000}) {
    TempDir dir("pipe-mem");
    std::vector<std::vector<double>> centers(3, std::vector<double>(8, 0.0));
    centers[1][0] = centers[2][1] = 5.0;
    const auto b = futopic::testing::gaussian_blobs(centers, per_blob, 0.1, 1);
    write_matching_corpus(b.ids, dir / "corpus");
    write_blob_embeddings(b, dir / "emb.fsem");
    const auto store = CorpusStore::open(dir / "corpus");
    PipelineOptions opts;
    opts.k = 3;
    opts.n_components = 4;
    opts.batch_size = 256;
    PipelineReport rep;
    fit_pipeline(store, dir / "emb.fsem", opts, [](const LabelEntry&) {}, &rep);
    model_bytes.push_back(rep.model_bytes);
    batch_bytes.push_back(rep.peak_batch_bytes);
  }
  EXPECT_EQ(model_bytes[0], model_bytes[1]);
  EXPECT_EQ(batch_bytes[0], batch_bytes[1]);
}
