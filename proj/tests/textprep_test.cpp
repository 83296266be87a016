#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <thread>

#include "futopic/textprep.hpp"
#include "support/testutil.hpp"

using namespace futopic;
using Tokens = std::vector<std::string>;

TEST(Normalize, WorkedExample) {
  EXPECT_EQ(normalize_tweet("The future of #AI is here! https://t.co/x @user"), (Tokens{"future", "#ai"}));
}

TEST(Normalize, EmptyInput) { EXPECT_TRUE(normalize_tweet("").empty()); }

TEST(Normalize, HashtagsCaseFold) {
  EXPECT_EQ(normalize_tweet("#RemoteWork #remotework"), (Tokens{"#remotework", "#remotework"}));
}

TEST(Normalize, UrlsAndMentionsDropped) {
  EXPECT_EQ(normalize_tweet("see http://example.com/a?b=c and www.foo.org/x plus t.co/abc"), (Tokens{"see", "plus"}));
  EXPECT_EQ(normalize_tweet("@alice @bob_99 thanks futurists"), (Tokens{"thanks", "futurists"}));
}

TEST(Normalize, SplitsOnPunctuationAndDropsEmoji) {
  EXPECT_EQ(normalize_tweet("AI-driven, climate\xE2\x80\x94" "change \xF0\x9F\x9A\x80 rocket"),
            (Tokens{"ai", "driven", "climate", "change", "rocket"}));
}

TEST(Normalize, ShortTokensDroppedHashtagMarkerNotCounted) {
  EXPECT_EQ(normalize_tweet("x #y #5g 5g go"), (Tokens{"#5g", "5g", "go"}));
}

TEST(Normalize, StopwordsApplyToPlainWordsOnly) {
  EXPECT_EQ(normalize_tweet("the #the"), (Tokens{"#the"}));
}

TEST(Normalize, NfcComposesBeforeLowercasing) {
  // "CAFE" + combining acute accent vs precomposed "café".
  EXPECT_EQ(normalize_tweet("CAFE\xCC\x81"), normalize_tweet("caf\xC3\xA9"));
  EXPECT_EQ(normalize_tweet("caf\xC3\xA9"), Tokens{"caf\xC3\xA9"});
}

TEST(Normalize, PureAcrossThreads) {
  const std::string text = "Hybrid #FutureOfWork needs culture, office & conversation https://t.co/q";
  const auto expected = normalize_tweet(text);
  std::vector<Tokens> results(8);
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < results.size(); ++i) {
      pool.emplace_back([&, i] {
        for (int r = 0; r < 100; ++r) results[i] = normalize_tweet(text);
      });
    }
  }
  for (const auto& r : results) EXPECT_EQ(r, expected);
}

TEST(Stopwords, BundledListMatchesShippedAsset) {
  const auto asset = StopwordList::load(std::filesystem::path(FUTOPIC_SOURCE_DIR) / "data" / "stopwords-en-v1.txt");
  EXPECT_EQ(asset.id, "stopwords-en-v1");
  EXPECT_EQ(asset.words, StopwordList::bundled().words);
}

namespace {

Vocabulary build(const std::vector<Tokens>& docs, std::uint64_t min_df, double max_df) {
  VocabularyBuilder b(VocabParams{min_df, max_df, "test"});
  for (const auto& d : docs) b.add_document(d);
  return std::move(b).finish();
}

}  // namespace

TEST(Vocabulary, MinDfFilter) {
  const auto v = build({{"a", "b"}, {"a", "c"}, {"a"}}, 2, 1.0);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.term(0), "a");
  EXPECT_EQ(v.doc_freq(0), 3u);
  EXPECT_FALSE(v.lookup("b").has_value());
}

TEST(Vocabulary, MaxDfFilterEmptiesVocabularyAndFails) {
  try {
    build({{"a", "b"}, {"a", "c"}, {"a"}}, 2, 0.5);
    FAIL() << "expected failure";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("loosen"), std::string::npos);
  }
}

TEST(Vocabulary, InvalidParamsRejected) {
  EXPECT_THROW(VocabularyBuilder(VocabParams{0, 0.5, "x"}), InvalidArgument);
  EXPECT_THROW(VocabularyBuilder(VocabParams{1, 0.0, "x"}), InvalidArgument);
  EXPECT_THROW(VocabularyBuilder(VocabParams{1, 1.5, "x"}), InvalidArgument);
}

TEST(Vocabulary, DeterministicSortedIdsAndJsonRoundTrip) {
  const std::vector<Tokens> docs{{"zeta", "alpha", "#tag"}, {"alpha", "mid"}, {"zeta", "mid", "#tag"}};
  const auto v1 = build(docs, 1, 1.0);
  const auto v2 = build(docs, 1, 1.0);
  EXPECT_EQ(v1, v2);
  EXPECT_EQ(v1.terms(), (Tokens{"#tag", "alpha", "mid", "zeta"}));
  EXPECT_EQ(Vocabulary::from_json(v1.to_json()), v1);
}

TEST(Vocabulary, FilterSoundnessAgainstBruteForceRecount) {
  std::mt19937 rng(3);
  for (int round = 0; round < 30; ++round) {
    std::uniform_int_distribution<int> ndocs(5, 40), len(0, 12), term(0, 15), mindf(1, 4);
    std::uniform_real_distribution<double> maxdf(0.2, 1.0);
    std::vector<Tokens> docs(static_cast<std::size_t>(ndocs(rng)));
    for (auto& d : docs) {
      const int n = len(rng);
      for (int i = 0; i < n; ++i) d.push_back("t" + std::to_string(term(rng)));
    }
    const std::uint64_t min_df = static_cast<std::uint64_t>(mindf(rng));
    const double max_df = maxdf(rng);

    std::map<std::string, std::uint64_t> df;
    for (const auto& d : docs) {
      for (const auto& t : std::set<std::string>(d.begin(), d.end())) ++df[t];
    }
    std::vector<std::string> expected;
    for (const auto& [t, f] : df) {
      if (f >= min_df && static_cast<double>(f) <= max_df * static_cast<double>(docs.size())) expected.push_back(t);
    }
    if (expected.empty()) {
      EXPECT_THROW(build(docs, min_df, max_df), Error);
      continue;
    }
    const auto v = build(docs, min_df, max_df);
    EXPECT_EQ(v.terms(), expected);
    for (TermId id = 0; id < v.size(); ++id) EXPECT_EQ(v.doc_freq(id), df[v.term(id)]);

    // Encoding every document and counting presence reproduces doc_freq.
    std::vector<std::uint64_t> recount(v.size(), 0);
    for (const auto& d : docs) {
      for (const auto& [tid, c] : encode_bow(d, v).counts) {
        EXPECT_GT(c, 0u);
        ++recount[tid];
      }
    }
    for (TermId id = 0; id < v.size(); ++id) EXPECT_EQ(recount[id], v.doc_freq(id));
  }
}

TEST(EncodeBow, AggregatesCounts) {
  const Vocabulary v({"a", "b"}, {1, 1}, 1, {});
  const auto doc = encode_bow({"a", "b", "a"}, v, 9);
  EXPECT_EQ(doc.doc_id, 9u);
  EXPECT_EQ(doc.counts, (std::vector<std::pair<TermId, std::uint32_t>>{{0, 2}, {1, 1}}));
  EXPECT_EQ(doc.total_tokens, 3u);
}

TEST(EncodeBow, OutOfVocabularyDropped) {
  const Vocabulary v({"a", "b"}, {1, 1}, 1, {});
  EXPECT_TRUE(encode_bow({"z"}, v).counts.empty());
  EXPECT_EQ(encode_bow({"z"}, v).total_tokens, 0u);
  EXPECT_TRUE(encode_bow({}, v).counts.empty());
}

TEST(CorpusVocabulary, BuildsFromStoreWithBundledStopwords) {
  futopic::testing::TempDir dir("vocab");
  std::string text;
  for (int i = 0; i < 6; ++i) {
    text += futopic::testing::tweet_line(i, "2021-01-0" + std::to_string(i + 1), "u",
                                         "The future of #RemoteWork and office culture " + std::to_string(i)) +
            "\n";
  }
  std::istringstream in(text);
  ingest_jsonl(in, {parse_date("2021-01-01"), parse_date("2021-12-31")}, dir.path(), {});
  const auto store = CorpusStore::open(dir.path());
  const Tokenizer tok;
  const auto v = build_vocabulary(store, tok, VocabParams{2, 1.0, "ignored"});
  EXPECT_EQ(v.terms(), (Tokens{"#remotework", "culture", "future", "office"}));
  EXPECT_EQ(v.params().stopword_list_id, "en-v1");
  EXPECT_EQ(v.total_docs(), 6u);

  CorpusBowSource source(store, tok, v, 4, Parallelism{3});
  std::vector<BowDoc> batch;
  std::vector<std::size_t> sizes;
  while (source.next(batch)) {
    sizes.push_back(batch.size());
    for (const auto& d : batch) EXPECT_EQ(d.total_tokens, 4u);
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 2}));
}
