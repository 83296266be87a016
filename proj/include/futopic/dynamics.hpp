#pragma once

// Per-time-bucket topic shares. Each bucket row is the normalized sum of its
// documents' topic weights: a one-hot vector for hard cluster labels, theta for
// LDA. Weights accumulate in 128-bit fixed point, so a row does not depend on
// the order documents arrive in.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "futopic/corpus.hpp"
#include "futopic/error.hpp"
#include "futopic/timeutil.hpp"

namespace futopic::dynamics {

struct TopicTimeMatrix {
  Granularity granularity = Granularity::month;
  std::vector<UnixSeconds> buckets;
  std::uint32_t topics = 0;
  std::vector<std::vector<double>> shares;  // buckets x topics
  std::vector<std::uint64_t> doc_counts;

  nlohmann::json to_json() const {
    nlohmann::json b = nlohmann::json::array();
    for (auto t : buckets) b.push_back(format_date(t));
    nlohmann::json ids = nlohmann::json::array();
    for (std::uint32_t k = 0; k < topics; ++k) ids.push_back(k);
    return {{"schema_version", 1}, {"granularity", to_string(granularity)}, {"buckets", std::move(b)},
            {"topics", std::move(ids)}, {"shares", shares}, {"doc_counts", doc_counts}};
  }

  static TopicTimeMatrix from_json(const nlohmann::json& j) {
    TopicTimeMatrix m;
    m.granularity = parse_granularity(j.at("granularity").get<std::string>());
    for (const auto& b : j.at("buckets")) m.buckets.push_back(to_unix(parse_date(b.get<std::string>())));
    m.topics = static_cast<std::uint32_t>(j.at("topics").size());
    m.shares = j.at("shares").get<std::vector<std::vector<double>>>();
    m.doc_counts = j.at("doc_counts").get<std::vector<std::uint64_t>>();
    return m;
  }
};

class DynamicsAccumulator {
 public:
  static constexpr double kScale = 0x1.0p52;

  DynamicsAccumulator(std::vector<UnixSeconds> axis, Granularity g, std::uint32_t topics)
      : axis_(std::move(axis)), granularity_(g), topics_(topics) {
    if (topics == 0) throw InvalidArgument("topic count must be at least 1");
    if (axis_.empty()) throw InvalidArgument("bucket axis is empty");
    sums_.assign(axis_.size() * topics, 0);
    docs_.assign(axis_.size(), 0);
  }

  // Axis spanning a corpus' date range.
  static DynamicsAccumulator for_corpus(const CorpusStore& store, Granularity g, std::uint32_t topics) {
    const auto& st = store.stats();
    if (!st.min_date || !st.max_date) throw InvalidArgument("corpus has no date range: " + store.dir().string());
    return DynamicsAccumulator(bucket_axis(*st.min_date, *st.max_date, g), g, topics);
  }

  void add_label(UnixSeconds created_at, std::uint32_t label) {
    if (label >= topics_) throw InvalidArgument("label " + std::to_string(label) + " out of range");
    const auto b = index(created_at);
    sums_[b * topics_ + label] += static_cast<__int128>(kScale);
    ++docs_[b];
  }

  void add_weights(UnixSeconds created_at, std::span<const double> weights) {
    if (weights.size() != topics_) throw InvalidArgument("weight vector length does not match topic count");
    const auto b = index(created_at);
    for (std::uint32_t k = 0; k < topics_; ++k) {
      if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) throw InvalidArgument("topic weights must be finite and non-negative");
      sums_[b * topics_ + k] += static_cast<__int128>(std::llround(weights[k] * kScale));
    }
    ++docs_[b];
  }

  TopicTimeMatrix finish() const {
    TopicTimeMatrix m;
    m.granularity = granularity_;
    m.buckets = axis_;
    m.topics = topics_;
    m.doc_counts = docs_;
    m.shares.assign(axis_.size(), std::vector<double>(topics_, 0.0));
    for (std::size_t b = 0; b < axis_.size(); ++b) {
      __int128 total = 0;
      for (std::uint32_t k = 0; k < topics_; ++k) total += sums_[b * topics_ + k];
      if (total == 0) continue;
      const long double denom = static_cast<long double>(total);
      for (std::uint32_t k = 0; k < topics_; ++k) {
        m.shares[b][k] = static_cast<double>(static_cast<long double>(sums_[b * topics_ + k]) / denom);
      }
    }
    return m;
  }

 private:
  std::size_t index(UnixSeconds t) const {
    const auto b = bucket_index(axis_, t);
    if (b >= axis_.size() || t >= next_bucket(axis_[b], granularity_)) {
      throw InvalidArgument("timestamp " + format_timestamp(t) + " is outside the bucket axis");
    }
    return b;
  }

  std::vector<UnixSeconds> axis_;
  Granularity granularity_;
  std::uint32_t topics_;
  std::vector<__int128> sums_;
  std::vector<std::uint64_t> docs_;
};

// Standard deviation over non-empty buckets of each topic's share series.
inline std::vector<double> share_stddev(const TopicTimeMatrix& m) {
  std::vector<double> out(m.topics, 0.0);
  std::size_t n = 0;
  std::vector<double> mean(m.topics, 0.0);
  for (std::size_t b = 0; b < m.buckets.size(); ++b) {
    if (m.doc_counts[b] == 0) continue;
    ++n;
    for (std::uint32_t k = 0; k < m.topics; ++k) mean[k] += m.shares[b][k];
  }
  if (n == 0) return out;
  for (auto& x : mean) x /= static_cast<double>(n);
  for (std::size_t b = 0; b < m.buckets.size(); ++b) {
    if (m.doc_counts[b] == 0) continue;
    for (std::uint32_t k = 0; k < m.topics; ++k) out[k] += (m.shares[b][k] - mean[k]) * (m.shares[b][k] - mean[k]);
  }
  for (auto& x : out) x = std::sqrt(x / static_cast<double>(n));
  return out;
}

}  // namespace futopic::dynamics
