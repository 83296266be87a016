#pragma once

// Topic hierarchy: cosine similarity of c-TF-IDF vectors, average-linkage
// agglomeration on 1 - cosine, dendrogram cuts that re-aggregate class counts,
// and 2-D inter-topic coordinates from PCA of the topic vectors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "futopic/ctfidf.hpp"
#include "futopic/error.hpp"

namespace futopic::topics {

using SimilarityMatrix = std::vector<std::vector<double>>;

inline SimilarityMatrix similarity_matrix(const std::vector<std::vector<double>>& vectors,
                                          const std::function<void(const std::string&)>& warn = {}) {
  const std::size_t k = vectors.size();
  if (k < 2) throw InvalidArgument("similarity needs at least two topics");
  std::vector<double> norms(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (double x : vectors[i]) norms[i] += x * x;
    norms[i] = std::sqrt(norms[i]);
    if (norms[i] == 0.0 && warn) warn("topic " + std::to_string(i) + " has a zero vector; similarity set to 0");
  }
  SimilarityMatrix s(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    s[i][i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) continue;
      if (vectors[i] == vectors[j]) {
        s[i][j] = s[j][i] = 1.0;
        continue;
      }
      double dot = 0.0;
      for (std::size_t t = 0; t < vectors[i].size(); ++t) dot += vectors[i][t] * vectors[j][t];
      s[i][j] = s[j][i] = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
    }
  }
  return s;
}

struct Merge {
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double height = 0.0;
  std::uint32_t node = 0;
  std::uint32_t size = 0;

  bool operator==(const Merge&) const = default;
};

// Leaves are nodes 0..k-1; merge i creates node k + i.
struct Dendrogram {
  std::uint32_t leaves = 0;
  std::vector<Merge> merges;

  bool operator==(const Dendrogram&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json m = nlohmann::json::array();
    for (const auto& x : merges) {
      m.push_back({{"left", x.left}, {"right", x.right}, {"height", x.height}, {"node", x.node}, {"size", x.size}});
    }
    return {{"schema_version", 1}, {"leaves", leaves}, {"linkage", "average"}, {"distance", "1-cosine"},
            {"merges", std::move(m)}};
  }

  static Dendrogram from_json(const nlohmann::json& j) {
    Dendrogram d;
    d.leaves = j.at("leaves").get<std::uint32_t>();
    for (const auto& x : j.at("merges")) {
      d.merges.push_back({x.at("left").get<std::uint32_t>(), x.at("right").get<std::uint32_t>(),
                          x.at("height").get<double>(), x.at("node").get<std::uint32_t>(),
                          x.at("size").get<std::uint32_t>()});
    }
    return d;
  }
};

// Average linkage via the Lance-Williams update. Among equal distances the
// pair with the lowest (smaller node id, larger node id) merges first.
inline Dendrogram build_dendrogram(const SimilarityMatrix& sim) {
  const std::size_t k = sim.size();
  if (k < 2) throw InvalidArgument("dendrogram needs at least two topics");
  const std::size_t nodes = 2 * k - 1;
  std::vector<std::vector<double>> dist(nodes, std::vector<double>(nodes, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) dist[i][j] = i == j ? 0.0 : std::max(0.0, 1.0 - sim[i][j]);
  std::vector<std::uint32_t> active(k);
  std::iota(active.begin(), active.end(), 0u);
  std::vector<std::uint32_t> size(nodes, 1);
  Dendrogram d;
  d.leaves = static_cast<std::uint32_t>(k);
  for (std::uint32_t step = 0; step + 1 < k; ++step) {
    // active stays sorted, so scanning i < j visits pairs in tie-break order
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double x = dist[active[i]][active[j]];
        if (x < best) {
          best = x;
          bi = i;
          bj = j;
        }
      }
    }
    const std::uint32_t a = active[bi], b = active[bj];
    const std::uint32_t node = static_cast<std::uint32_t>(k) + step;
    size[node] = size[a] + size[b];
    const double height = d.merges.empty() ? best : std::max(best, d.merges.back().height);
    d.merges.push_back({a, b, height, node, size[node]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    const double wa = static_cast<double>(size[a]) / size[node];
    const double wb = static_cast<double>(size[b]) / size[node];
    for (auto o : active) dist[node][o] = dist[o][node] = wa * dist[a][o] + wb * dist[b][o];
    active.push_back(node);
  }
  return d;
}

// Old topic -> new topic after applying the first (k - target) merges. New ids
// are assigned in order of each group's smallest original topic id.
inline std::vector<std::uint32_t> cut_dendrogram(const Dendrogram& d, std::uint32_t target) {
  const std::uint32_t k = d.leaves;
  if (target < 1 || target > k) {
    throw InvalidArgument("target must be between 1 and " + std::to_string(k) + ", got " + std::to_string(target));
  }
  std::vector<std::uint32_t> parent(2 * k - 1);
  std::iota(parent.begin(), parent.end(), 0u);
  for (std::uint32_t m = 0; m < k - target; ++m) {
    parent[d.merges[m].left] = d.merges[m].node;
    parent[d.merges[m].right] = d.merges[m].node;
  }
  auto root = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  std::vector<std::uint32_t> mapping(k);
  std::vector<std::int64_t> group_id(2 * k - 1, -1);
  std::uint32_t next = 0;
  for (std::uint32_t t = 0; t < k; ++t) {
    const auto r = root(t);
    if (group_id[r] < 0) group_id[r] = next++;
    mapping[t] = static_cast<std::uint32_t>(group_id[r]);
  }
  return mapping;
}

inline ClassTermMatrix merge_classes(const ClassTermMatrix& m, const std::vector<std::uint32_t>& mapping) {
  if (mapping.size() != m.k) throw InvalidArgument("mapping size does not match class count");
  const std::uint32_t target = mapping.empty() ? 0 : *std::max_element(mapping.begin(), mapping.end()) + 1;
  ClassTermMatrix out(target, m.v);
  for (std::uint32_t c = 0; c < m.k; ++c) {
    out.class_sizes[mapping[c]] += m.class_sizes[c];
    for (TermId t = 0; t < m.v; ++t) out.at(mapping[c], t) += m.at(c, t);
  }
  return out;
}

struct Reduction {
  std::vector<std::uint32_t> mapping;  // old topic -> new topic
  ClassTermMatrix counts;
  std::vector<TopicRepresentation> representations;
};

// Cuts the dendrogram and recomputes c-TF-IDF from the re-aggregated counts.
inline Reduction reduce_topics(const ClassTermMatrix& counts, const Dendrogram& d, std::uint32_t target) {
  if (d.leaves != counts.k) throw InvalidArgument("dendrogram leaves do not match class count");
  Reduction r;
  r.mapping = cut_dendrogram(d, target);
  r.counts = merge_classes(counts, r.mapping);
  r.representations = ctfidf(r.counts);
  return r;
}

struct MapPoint {
  std::uint32_t topic_id = 0;
  double x = 0.0;
  double y = 0.0;
  std::uint64_t size = 0;
  std::string label;

  bool operator==(const MapPoint&) const = default;
};

struct TopicMap2D {
  std::vector<MapPoint> points;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points) {
      arr.push_back({{"topic_id", p.topic_id}, {"x", p.x}, {"y", p.y}, {"size", p.size}, {"label", p.label}});
    }
    return {{"schema_version", 1}, {"method", "pca"}, {"points", std::move(arr)}};
  }
};

// 2-D PCA of the topic vectors through the k x k Gram matrix of the centred
// rows; each axis is signed so its largest-magnitude coordinate is positive.
inline TopicMap2D intertopic_map(const std::vector<std::vector<double>>& vectors,
                                 const std::vector<std::uint64_t>& sizes, const std::vector<std::string>& labels) {
  const std::size_t k = vectors.size();
  if (k < 2) throw InvalidArgument("inter-topic map needs at least two topics");
  if (sizes.size() != k || labels.size() != k) throw InvalidArgument("sizes and labels must match topic count");
  const std::size_t v = vectors[0].size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v));
  for (std::size_t i = 0; i < k; ++i) {
    if (vectors[i].size() != v) throw InvalidArgument("topic vectors differ in length");
    for (std::size_t t = 0; t < v; ++t) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = vectors[i][t];
  }
  x.rowwise() -= x.colwise().mean();
  const auto n = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) gram(i, j) = x.row(i).dot(x.row(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  // Projection written as gram * u / sqrt(lambda) so identical topics get
  // bit-identical coordinates.
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, 2);
  for (int axis = 0; axis < 2; ++axis) {
    const Eigen::Index col = n - 1 - axis;
    const double lambda = eig.eigenvalues()[col];
    if (!(lambda > 1e-12 * std::max(1.0, eig.eigenvalues()[n - 1]))) continue;
    const Eigen::VectorXd u = eig.eigenvectors().col(col);
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) c[i] = gram.row(i).dot(u) / std::sqrt(lambda);
    Eigen::Index arg = 0;
    c.cwiseAbs().maxCoeff(&arg);
    if (c[arg] < 0) c = -c;
    coords.col(axis) = c;
  }
  TopicMap2D map;
  for (std::size_t i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    map.points.push_back({static_cast<std::uint32_t>(i), coords(r, 0), coords(r, 1), sizes[i], labels[i]});
  }
  return map;
}

inline std::string topic_label(const TopicTerms& t, std::size_t n = 3) {
  std::string out;
  for (std::size_t i = 0; i < std::min(n, t.terms.size()); ++i) {
    if (i) out += "_";
    out += t.terms[i].first;
  }
  return out;
}

}  // namespace futopic::topics
