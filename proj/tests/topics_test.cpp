#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "futopic/hierarchy.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace futopic;
using namespace futopic::topics;
using namespace futopic::oracle;

namespace {

BowDoc bow(std::uint64_t id, std::vector<std::pair<TermId, std::uint32_t>> counts) {
  BowDoc d;
  d.doc_id = id;
  d.counts = std::move(counts);
  for (const auto& [t, n] : d.counts) d.total_tokens += n;
  return d;
}

ClassTermMatrix toy(std::uint64_t scale) {
  std::vector<BowDoc> docs{bow(1, {{0, static_cast<std::uint32_t>(2 * scale)}}),
                           bow(2, {{1, static_cast<std::uint32_t>(2 * scale)}})};
  VectorBowSource src(docs, 1);
  return class_term_counts(src, 2, 2, [](std::uint64_t id) { return std::optional<std::uint32_t>(id - 1); });
}

double weight(const TopicRepresentation& r, TermId t) {
  for (const auto& [id, w] : r.ctfidf) {
    if (id == t) return w;
  }
  return 0.0;
}

struct RandomLabeled {
  std::vector<BowDoc> docs;
  std::vector<std::uint32_t> labels;
};

RandomLabeled random_labeled(std::mt19937& rng, std::uint32_t k, std::uint32_t v, std::size_t n) {
  RandomLabeled r;
  std::uniform_int_distribution<std::uint32_t> label(0, k - 1), term(0, v - 1), count(1, 4), len(0, 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<TermId, std::uint32_t> c;
    const auto l = len(rng);
    for (std::uint32_t j = 0; j < l; ++j) c[term(rng)] += count(rng);
    r.docs.push_back(bow(i, {c.begin(), c.end()}));
    r.labels.push_back(label(rng));
  }
  return r;
}

ClassTermMatrix counts_of(const std::vector<BowDoc>& docs, const std::vector<std::uint32_t>& labels, std::uint32_t k,
                          std::uint32_t v) {
  VectorBowSource src(docs, 7);
  return class_term_counts(src, k, v, [&](std::uint64_t id) { return std::optional<std::uint32_t>(labels[id]); });
}

std::vector<std::vector<double>> random_vectors(std::mt19937& rng, std::size_t k, std::size_t v) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out(k, std::vector<double>(v));
  for (auto& row : out)
    for (auto& x : row) x = u(rng) < 0.4 ? 0.0 : u(rng);
  return out;
}

}  // namespace

TEST(ClassTermCounts, ToyMatrix) {
  const auto m = toy(1);
  EXPECT_EQ(m.counts, (std::vector<std::uint64_t>{2, 0, 0, 2}));
  EXPECT_EQ(m.class_sizes, (std::vector<std::uint64_t>{1, 1}));
}

TEST(ClassTermCounts, EmptyClassIsZeroRow) {
  std::vector<BowDoc> docs{bow(1, {{0, 1}})};
  VectorBowSource src(docs, 8);
  const auto m = class_term_counts(src, 3, 2, [](std::uint64_t) { return std::optional<std::uint32_t>(0); });
  EXPECT_EQ(m.class_sizes, (std::vector<std::uint64_t>{1, 0, 0}));
  EXPECT_EQ(m.at(2, 0), 0u);
  const auto reps = ctfidf(m);
  EXPECT_TRUE(reps[2].ctfidf.empty());
  EXPECT_EQ(reps[2].size, 0u);
}

TEST(ClassTermCounts, UnlabeledDocumentIsFatalWithId) {
  std::vector<BowDoc> docs{bow(1, {{0, 1}}), bow(77, {{1, 1}})};
  VectorBowSource src(docs, 8);
  try {
    class_term_counts(src, 2, 2, [](std::uint64_t id) {
      return id == 77 ? std::nullopt : std::optional<std::uint32_t>(0);
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
  }
}

TEST(ClassTermCounts, ColumnSumsConserveCorpusCounts) {
  std::mt19937 rng(1);
  for (int round = 0; round < 20; ++round) {
    const auto r = random_labeled(rng, 6, 15, 60);
    const auto m = counts_of(r.docs, r.labels, 6, 15);
    std::vector<std::uint64_t> direct(15, 0);
    for (const auto& d : r.docs)
      for (const auto& [t, n] : d.counts) direct[t] += n;
    EXPECT_EQ(m.column_sums(), direct);
    EXPECT_EQ(m.documents(), r.docs.size());
  }
}

TEST(Ctfidf, TwoClassToyHandValues) {
  const auto reps = ctfidf(toy(1));
  EXPECT_NEAR(weight(reps[0], 0), std::log(2.0), 1e-9);
  EXPECT_EQ(weight(reps[1], 0), 0.0);
  EXPECT_NEAR(weight(reps[1], 1), std::log(2.0), 1e-9);
}

TEST(Ctfidf, ScaleInvarianceIsExact) {
  EXPECT_EQ(ctfidf(toy(1)), ctfidf(toy(10)));
  std::mt19937 rng(4);
  for (int round = 0; round < 20; ++round) {
    const auto r = random_labeled(rng, 5, 12, 40);
    auto m = counts_of(r.docs, r.labels, 5, 12);
    if (m.documents() == 0 || std::all_of(m.counts.begin(), m.counts.end(), [](auto x) { return x == 0; })) continue;
    auto scaled = m;
    for (auto& x : scaled.counts) x *= 10;
    const auto a = ctfidf(m), b = ctfidf(scaled);
    for (std::size_t c = 0; c < a.size(); ++c) EXPECT_EQ(a[c].ctfidf, b[c].ctfidf);
  }
}

TEST(Ctfidf, UniformTermGetsEqualWeights) {
  ClassTermMatrix m(3, 2);
  for (std::uint32_t c = 0; c < 3; ++c) {
    m.at(c, 0) = 4;
    m.at(c, 1) = 1 + c;
  }
  const auto reps = ctfidf(m);
  EXPECT_GT(weight(reps[0], 0), 0.0);
  // equal tf only where the row totals match; compare the idf factor directly
  const double idf = weight(reps[0], 0) / (4.0 / 5.0);
  EXPECT_NEAR(weight(reps[1], 0) / (4.0 / 6.0), idf, 1e-15);
  EXPECT_NEAR(weight(reps[2], 0) / (4.0 / 7.0), idf, 1e-15);

  ClassTermMatrix eq(3, 1);
  eq.counts = {3, 3, 3};
  const auto r2 = ctfidf(eq);
  EXPECT_EQ(weight(r2[0], 0), weight(r2[1], 0));
  EXPECT_EQ(weight(r2[1], 0), weight(r2[2], 0));
}

TEST(Ctfidf, AllZeroMatrixIsFatal) { EXPECT_THROW(ctfidf(ClassTermMatrix(2, 3)), Error); }

TEST(TopTerms, RankingTiesAndTruncation) {
  TopicRepresentation r;
  r.ranked = rank_terms({{0, 0.2}, {1, 0.5}});
  EXPECT_EQ(top_terms(r, 1), (std::vector<std::pair<TermId, double>>{{1, 0.5}}));
  r.ranked = rank_terms({{5, 0.3}, {2, 0.3}, {9, 0.1}});
  EXPECT_EQ(top_terms(r, 2), (std::vector<std::pair<TermId, double>>{{2, 0.3}, {5, 0.3}}));
  EXPECT_EQ(top_terms(r, 10).size(), 3u);
  EXPECT_THROW(top_terms(r, 0), InvalidArgument);
}

TEST(TopicsJson, RoundTrip) {
  std::vector<TopicTerms> t{{0, 12, {{"ai", 0.5}, {"#future", 0.25}}}, {1, 3, {}}};
  EXPECT_EQ(topics_from_json(topics_to_json(t)), t);
  EXPECT_THROW(topics_from_json(nlohmann::json::object()), FormatError);
  EXPECT_THROW(topics_from_json(nlohmann::json::parse(R"([{"topic_id":0,"terms":[["a"]]}])")), FormatError);
}

TEST(Similarity, IdenticalOrthogonalAndSymmetric) {
  const auto s = similarity_matrix({{1, 2, 0}, {2, 4, 0}, {0, 0, 3}});
  EXPECT_NEAR(s[0][1], 1.0, 1e-12);
  EXPECT_EQ(s[0][2], 0.0);
  std::mt19937 rng(3);
  const auto v = random_vectors(rng, 8, 20);
  const auto m = similarity_matrix(v);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(m[i][i], 1.0, 1e-9);
    for (std::size_t j = 0; j < 8; ++j) {
      EXPECT_EQ(m[i][j], m[j][i]);
      if (i == j) continue;
      double dot = 0, a = 0, b = 0;
      for (std::size_t t = 0; t < 20; ++t) {
        dot += v[i][t] * v[j][t];
        a += v[i][t] * v[i][t];
        b += v[j][t] * v[j][t];
      }
      EXPECT_NEAR(m[i][j], dot / std::sqrt(a * b), 1e-12);
    }
  }
}

TEST(Similarity, ZeroVectorWarnsAndIsolates) {
  int warnings = 0;
  const auto s = similarity_matrix({{1, 0}, {0, 0}}, [&](const std::string&) { ++warnings; });
  EXPECT_EQ(warnings, 1);
  EXPECT_EQ(s[0][1], 0.0);
  EXPECT_THROW(similarity_matrix({{1.0}}), InvalidArgument);
}

TEST(Dendrogram, IdenticalPairMergesFirstAtZero) {
  const auto d = build_dendrogram(similarity_matrix({{1, 0, 1}, {0, 1, 0}, {1, 0, 1}}));
  ASSERT_EQ(d.merges.size(), 2u);
  EXPECT_EQ(d.merges[0].left, 0u);
  EXPECT_EQ(d.merges[0].right, 2u);
  EXPECT_EQ(d.merges[0].height, 0.0);
}

TEST(Dendrogram, TiesBreakToLowestPair) {
  // all pairwise distances equal
  const SimilarityMatrix s(4, std::vector<double>(4, 0.5));
  const auto d = build_dendrogram(s);
  EXPECT_EQ(d.merges[0].left, 0u);
  EXPECT_EQ(d.merges[0].right, 1u);
  EXPECT_EQ(d.merges[1].left, 2u);
  EXPECT_EQ(d.merges[1].right, 3u);
}

TEST(Dendrogram, MatchesBruteForceLinkage) {
  std::mt19937 rng(8);
  for (int round = 0; round < 200; ++round) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    const auto sim = similarity_matrix(random_vectors(rng, k, 6));
    const auto d = build_dendrogram(sim);
    const auto ref = brute_force_linkage(sim);
    ASSERT_EQ(d.merges.size(), k - 1);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_EQ(d.merges[i].left, ref[i].left);
      EXPECT_EQ(d.merges[i].right, ref[i].right);
      EXPECT_EQ(d.merges[i].node, ref[i].node);
      EXPECT_EQ(d.merges[i].size, ref[i].size);
      EXPECT_NEAR(d.merges[i].height, ref[i].height, 1e-12);
      if (i > 0) {
        EXPECT_GE(d.merges[i].height, d.merges[i - 1].height);
      }
    }
    EXPECT_EQ(Dendrogram::from_json(d.to_json()), d);
  }
}

TEST(Reduce, ConservationForAllTargets) {
  std::mt19937 rng(12);
  for (int round = 0; round < 40; ++round) {
    const std::uint32_t k = std::uniform_int_distribution<std::uint32_t>(2, 12)(rng);
    const std::uint32_t v = 20;
    const auto r = random_labeled(rng, k, v, 150);
    const auto m = counts_of(r.docs, r.labels, k, v);
    const auto reps = ctfidf(m);
    std::vector<std::vector<double>> vecs;
    for (const auto& rep : reps) vecs.push_back(dense_vector(rep, v));
    const auto d = build_dendrogram(similarity_matrix(vecs));
    for (std::uint32_t target = 1; target <= k; ++target) {
      const auto red = reduce_topics(m, d, target);
      EXPECT_EQ(red.counts.k, target);
      EXPECT_EQ(red.counts.column_sums(), m.column_sums());
      EXPECT_EQ(red.counts.documents(), m.documents());
      // relabel documents and re-aggregate from scratch
      std::vector<std::uint32_t> relabeled;
      for (auto l : r.labels) relabeled.push_back(red.mapping[l]);
      EXPECT_EQ(counts_of(r.docs, relabeled, target, v), red.counts);
    }
  }
}

TEST(Reduce, IdentityAndSingleTopic) {
  std::mt19937 rng(2);
  const auto r = random_labeled(rng, 4, 10, 50);
  const auto m = counts_of(r.docs, r.labels, 4, 10);
  std::vector<std::vector<double>> vecs;
  for (const auto& rep : ctfidf(m)) vecs.push_back(dense_vector(rep, 10));
  const auto d = build_dendrogram(similarity_matrix(vecs));
  const auto same = reduce_topics(m, d, 4);
  EXPECT_EQ(same.mapping, (std::vector<std::uint32_t>{0, 1, 2, 3}));
  EXPECT_EQ(same.representations, ctfidf(m));
  const auto one = reduce_topics(m, d, 1);
  EXPECT_EQ(one.counts.counts, m.column_sums());
  EXPECT_THROW(reduce_topics(m, d, 5), InvalidArgument);
  EXPECT_THROW(reduce_topics(m, d, 0), InvalidArgument);
}

TEST(IntertopicMap, IdenticalTopicsShareCoordinates) {
  const auto map = intertopic_map({{1, 0, 2}, {0, 3, 1}, {1, 0, 2}, {2, 2, 2}}, {5, 6, 7, 8}, {"a", "b", "c", "d"});
  ASSERT_EQ(map.points.size(), 4u);
  EXPECT_EQ(map.points[0].x, map.points[2].x);
  EXPECT_EQ(map.points[0].y, map.points[2].y);
  EXPECT_EQ(map.points[3].size, 8u);
  EXPECT_THROW(intertopic_map({{1.0}}, {1}, {"a"}), InvalidArgument);
}

TEST(IntertopicMap, AxesMatchEigendecompositionAndOrderVariance) {
  std::mt19937 rng(5);
  const auto v = random_vectors(rng, 10, 15);
  const auto map = intertopic_map(v, std::vector<std::uint64_t>(10, 1), std::vector<std::string>(10, "x"));
  // oracle: covariance eigenvalues of the centred topic vectors
  Eigen::MatrixXd x(10, 15);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 15; ++j) x(i, j) = v[i][j];
  x.rowwise() -= x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
  double sx = 0, sy = 0, mx = 0, my = 0;
  for (const auto& p : map.points) {
    mx += p.x;
    my += p.y;
  }
  EXPECT_NEAR(mx, 0.0, 1e-9);
  EXPECT_NEAR(my, 0.0, 1e-9);
  for (const auto& p : map.points) {
    sx += p.x * p.x;
    sy += p.y * p.y;
  }
  EXPECT_NEAR(sx, eig.eigenvalues()[14], 1e-9);
  EXPECT_NEAR(sy, eig.eigenvalues()[13], 1e-9);
  EXPECT_GE(sx, sy);
}

TEST(IntertopicMap, TopicLabelJoinsTopThree) {
  TopicTerms t{0, 1, {{"a", 3}, {"b", 2}, {"c", 1}, {"d", 0.5}}};
  EXPECT_EQ(topic_label(t), "a_b_c");
}
