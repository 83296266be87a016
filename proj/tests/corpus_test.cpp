#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "futopic/corpus.hpp"
#include "support/testutil.hpp"

using namespace futopic;
using futopic::testing::TempDir;
using futopic::testing::tweet_line;

namespace {

DateWindow window(const char* since, const char* until) { return {parse_date(since), parse_date(until)}; }

CorpusStats ingest_string(const std::string& text, const std::filesystem::path& dir,
                          DateWindow w = window("2021-01-01", "2023-03-31"),
                          std::vector<std::uint64_t>* bad_lines = nullptr) {
  std::istringstream in(text);
  return ingest_jsonl(in, w, dir, [&](std::uint64_t line, const std::string&) {
    if (bad_lines != nullptr) bad_lines->push_back(line);
  });
}

std::vector<TweetRecord> read_all(const CorpusStore& store) {
  std::vector<TweetRecord> out;
  auto r = store.reader();
  TweetRecord rec;
  while (r.next(rec)) out.push_back(rec);
  return out;
}

}  // namespace

TEST(Timestamp, ParsesIsoAndClassicForms) {
  EXPECT_EQ(parse_timestamp("2021-01-01"), 1609459200);
  EXPECT_EQ(parse_timestamp("2021-01-01T00:00:00Z"), 1609459200);
  EXPECT_EQ(parse_timestamp("2021-01-01T01:00:00+01:00"), 1609459200);
  EXPECT_EQ(parse_timestamp("2021-01-01 00:00:00.123+00:00"), 1609459200);
  EXPECT_EQ(parse_timestamp("Fri Jan 01 00:00:00 +0000 2021"), 1609459200);
  EXPECT_FALSE(parse_timestamp("2021-02-30").has_value());
  EXPECT_FALSE(parse_timestamp("yesterday").has_value());
  EXPECT_FALSE(parse_timestamp("2021-01-01T25:00:00Z").has_value());
}

TEST(Ingest, RepeatedIdKeepsFirstOccurrence) {
  TempDir dir("ingest");
  const std::string text = tweet_line(1, "2021-05-01T10:00:00+00:00", "a", "first") + "\n" +
                           tweet_line(2, "2021-05-02T10:00:00+00:00", "b", "second") + "\n" +
                           tweet_line(1, "2021-05-03T10:00:00+00:00", "c", "repeat") + "\n";
  const auto stats = ingest_string(text, dir.path());
  EXPECT_EQ(stats.lines_read, 3u);
  EXPECT_EQ(stats.records_kept, 2u);
  EXPECT_EQ(stats.duplicates_dropped, 1u);
  EXPECT_EQ(stats.malformed_dropped, 0u);
  EXPECT_TRUE(stats.balanced());
  const auto recs = read_all(CorpusStore::open(dir.path()));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].text, "first");
  EXPECT_EQ(recs[1].text, "second");
}

TEST(Ingest, UnparseableDateIsMalformedAndLogged) {
  TempDir dir("ingest");
  const std::string text = tweet_line(1, "2021-05-01", "a", "ok") + "\n" +
                           tweet_line(2, "the fifth of may", "a", "bad date") + "\n";
  std::vector<std::uint64_t> bad;
  const auto stats = ingest_string(text, dir.path(), window("2021-01-01", "2023-03-31"), &bad);
  EXPECT_EQ(stats.malformed_dropped, 1u);
  EXPECT_EQ(stats.records_kept, 1u);
  EXPECT_EQ(bad, std::vector<std::uint64_t>{2});
  const auto recs = read_all(CorpusStore::open(dir.path()));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].id, 1u);
}

TEST(Ingest, AcceptsBothKeySpellingsAndNestedUser) {
  TempDir dir("ingest");
  const std::string text =
      R"({"id": 10, "date": "2021-02-01T00:00:00+00:00", "user": "alice", "content": "hello world"})"
      "\n"
      R"({"id": "11", "created_at": "Mon Feb 01 12:00:00 +0000 2021", "author": "bob", "text": "second"})"
      "\n"
      R"({"id": 12, "date": "2021-02-02", "user": {"username": "carol"}, "content": "third"})"
      "\n";
  const auto stats = ingest_string(text, dir.path());
  EXPECT_EQ(stats.records_kept, 3u);
  EXPECT_EQ(stats.distinct_authors, 3u);
  const auto recs = read_all(CorpusStore::open(dir.path()));
  EXPECT_EQ(recs[1].author, "bob");
  EXPECT_EQ(recs[1].created_at, 1612180800);
  EXPECT_EQ(recs[2].author, "carol");
}

TEST(Ingest, MalformedVariantsAreCountedNotFatal) {
  TempDir dir("ingest");
  const std::string text = "not json\n"
                           "[1,2,3]\n"
                           "\n" +
                           tweet_line(5, "2021-01-01", "a", "   ") + "\n" +
                           R"({"id": -4, "date": "2021-01-01", "user": "x", "content": "neg"})" "\n" +
                           R"({"date": "2021-01-01", "user": "x", "content": "no id"})" "\n" +
                           "{\"id\": 9, \"date\": \"2021-01-01\", \"user\": \"x\", \"content\": \"bad \xff utf8\"}\n" +
                           tweet_line(6, "2021-01-01", "a", "good") + "\n";
  std::vector<std::uint64_t> bad;
  const auto stats = ingest_string(text, dir.path(), window("2021-01-01", "2023-03-31"), &bad);
  EXPECT_EQ(stats.lines_read, 8u);
  EXPECT_EQ(stats.malformed_dropped, 7u);
  EXPECT_EQ(stats.records_kept, 1u);
  EXPECT_EQ(bad, (std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7}));
}

TEST(Ingest, WindowIsInclusiveOfBothDaysInUtc) {
  TempDir dir("ingest");
  const std::string text = tweet_line(1, "2020-12-31T23:59:59Z", "a", "before") + "\n" +
                           tweet_line(2, "2021-01-01T00:00:00Z", "a", "first second") + "\n" +
                           tweet_line(3, "2023-03-31T23:59:59Z", "a", "last second") + "\n" +
                           tweet_line(4, "2023-04-01T00:00:00Z", "a", "after") + "\n" +
                           tweet_line(5, "2021-01-01T00:30:00+01:00", "a", "offset before") + "\n";
  const auto stats = ingest_string(text, dir.path());
  EXPECT_EQ(stats.records_kept, 2u);
  EXPECT_EQ(stats.out_of_range_dropped, 3u);
  EXPECT_EQ(format_date(*stats.min_date), "2021-01-01");
  EXPECT_EQ(format_date(*stats.max_date), "2023-03-31");
}

TEST(Ingest, OutOfRangeRecordDoesNotClaimItsId) {
  TempDir dir("ingest");
  const std::string text = tweet_line(1, "2019-01-01", "a", "old") + "\n" + tweet_line(1, "2021-06-01", "a", "new") + "\n";
  const auto stats = ingest_string(text, dir.path());
  EXPECT_EQ(stats.out_of_range_dropped, 1u);
  EXPECT_EQ(stats.duplicates_dropped, 0u);
  EXPECT_EQ(stats.records_kept, 1u);
}

TEST(Ingest, SinceAfterUntilIsRejected) {
  TempDir dir("ingest");
  std::istringstream in("");
  EXPECT_THROW(ingest_jsonl(in, window("2022-01-01", "2021-01-01"), dir.path()), InvalidArgument);
}

TEST(Ingest, UnreadableInputIsFatal) {
  TempDir dir("ingest");
  EXPECT_THROW(ingest_jsonl_file(dir / "absent.jsonl", window("2021-01-01", "2021-12-31"), dir / "store"), IoError);
}

TEST(Ingest, IsIdempotentAcrossFreshStores) {
  TempDir a("ingest"), b("ingest");
  std::string text;
  for (int i = 0; i < 50; ++i) {
    text += tweet_line(static_cast<std::uint64_t>(i % 40), "2021-0" + std::to_string(1 + i % 9) + "-15", "u" + std::to_string(i % 3),
                       "text " + std::to_string(i)) +
            "\n";
  }
  text += "garbage\n";
  const auto s1 = ingest_string(text, a.path());
  const auto s2 = ingest_string(text, b.path());
  EXPECT_EQ(s1, s2);
  EXPECT_TRUE(s1.balanced());
  EXPECT_EQ(futopic::testing::read_file(a / kRecordsFile), futopic::testing::read_file(b / kRecordsFile));
  EXPECT_EQ(futopic::testing::read_file(a / kManifestFile), futopic::testing::read_file(b / kManifestFile));
}

TEST(Ingest, StatsBalanceOnRandomMixes) {
  std::mt19937 rng(7);
  for (int round = 0; round < 20; ++round) {
    TempDir dir("ingest");
    std::string text;
    std::uniform_int_distribution<int> kind(0, 3), id(0, 30), month(1, 12), year(2019, 2024);
    for (int i = 0; i < 60; ++i) {
      switch (kind(rng)) {
        case 0: text += "{broken\n"; break;
        default: {
          char date[16];
          std::snprintf(date, sizeof date, "%d-%02d-10", year(rng), month(rng));
          text += tweet_line(static_cast<std::uint64_t>(id(rng)), date, "u", "t") + "\n";
        }
      }
    }
    const auto stats = ingest_string(text, dir.path());
    EXPECT_EQ(stats.lines_read, 60u);
    EXPECT_TRUE(stats.balanced());
    EXPECT_EQ(CorpusStore::open(dir.path()).size(), stats.records_kept);
  }
}

class StreamFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string text;
    for (int i = 0; i < 10; ++i) text += tweet_line(100 + i, "2021-03-0" + std::to_string(1 + i % 9), "u", "doc " + std::to_string(i)) + "\n";
    ingest_string(text, dir.path());
  }
  TempDir dir{"stream"};
};

TEST_F(StreamFixture, BatchesOfFourAreFourFourTwo) {
  const auto store = CorpusStore::open(dir.path());
  std::vector<std::size_t> sizes;
  stream_corpus(store, 4, [&](const std::vector<TweetRecord>& b) { sizes.push_back(b.size()); });
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
}

TEST_F(StreamFixture, SingletonBatchesPreserveOrder) {
  const auto store = CorpusStore::open(dir.path());
  std::vector<TweetId> ids;
  stream_corpus(store, 1, [&](const std::vector<TweetRecord>& b) {
    ASSERT_EQ(b.size(), 1u);
    ids.push_back(b[0].id);
  });
  ASSERT_EQ(ids.size(), 10u);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(ids[i], 100 + i);
}

TEST_F(StreamFixture, RepeatedStreamsAreIdentical) {
  const auto store = CorpusStore::open(dir.path());
  auto collect = [&] {
    std::vector<std::vector<TweetRecord>> out;
    stream_corpus(store, 3, [&](const std::vector<TweetRecord>& b) { out.push_back(b); });
    return out;
  };
  EXPECT_EQ(collect(), collect());
}

TEST_F(StreamFixture, ZeroBatchSizeRejected) {
  const auto store = CorpusStore::open(dir.path());
  EXPECT_THROW(stream_corpus(store, 0, [](const auto&) {}), InvalidArgument);
}

TEST(Store, MissingOrCorruptStoreNamesThePath) {
  TempDir dir("store");
  try {
    CorpusStore::open(dir / "nowhere");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
  }
  std::istringstream in(tweet_line(1, "2021-01-05", "a", "hello") + "\n");
  ingest_jsonl(in, window("2021-01-01", "2021-12-31"), dir / "s");
  std::filesystem::resize_file(dir / "s" / kRecordsFile, 10);
  try {
    CorpusStore::open(dir / "s");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("records.bin"), std::string::npos);
  }
}

TEST(Buckets, SingleMonth) {
  TempDir dir("buckets");
  std::string text;
  for (int d = 1; d <= 31; d += 5) text += tweet_line(d, "2021-01-" + std::string(d < 10 ? "0" : "") + std::to_string(d), "u", "x") + "\n";
  ingest_string(text, dir.path());
  const auto buckets = time_buckets(CorpusStore::open(dir.path()), Granularity::month);
  ASSERT_EQ(buckets.size(), 1u);
  EXPECT_EQ(buckets[0].doc_ids.size(), 7u);
  EXPECT_EQ(format_date(buckets[0].bucket_start), "2021-01-01");
}

TEST(Buckets, MonthBoundarySplits) {
  TempDir dir("buckets");
  const std::string text = tweet_line(1, "2021-01-31T23:59:59Z", "u", "x") + "\n" + tweet_line(2, "2021-02-01T00:00:00Z", "u", "y") + "\n";
  ingest_string(text, dir.path());
  const auto buckets = time_buckets(CorpusStore::open(dir.path()), Granularity::month);
  ASSERT_EQ(buckets.size(), 2u);
  EXPECT_EQ(buckets[0].doc_ids, std::vector<TweetId>{1});
  EXPECT_EQ(buckets[1].doc_ids, std::vector<TweetId>{2});
}

TEST(Buckets, GapMonthsAreEmittedEmpty) {
  TempDir dir("buckets");
  const std::string text = tweet_line(1, "2021-01-10", "u", "x") + "\n" + tweet_line(2, "2021-04-10", "u", "y") + "\n";
  ingest_string(text, dir.path());
  const auto buckets = time_buckets(CorpusStore::open(dir.path()), Granularity::month);
  ASSERT_EQ(buckets.size(), 4u);
  EXPECT_TRUE(buckets[1].doc_ids.empty());
  EXPECT_TRUE(buckets[2].doc_ids.empty());
  EXPECT_EQ(format_date(buckets[2].bucket_start), "2021-03-01");
}

TEST(Buckets, WeeksStartOnMonday) {
  // 2021-01-03 is a Sunday, 2021-01-04 a Monday.
  EXPECT_EQ(format_date(bucket_start(*parse_timestamp("2021-01-03T12:00:00Z"), Granularity::week)), "2020-12-28");
  EXPECT_EQ(format_date(bucket_start(*parse_timestamp("2021-01-04T00:00:00Z"), Granularity::week)), "2021-01-04");
}

TEST(Buckets, PartitionHoldsForEveryGranularity) {
  TempDir dir("buckets");
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::int64_t> ts(*parse_timestamp("2021-01-01"), *parse_timestamp("2022-06-30"));
  std::string text;
  for (int i = 0; i < 300; ++i) {
    text += nlohmann::json{{"id", i}, {"date", format_timestamp(ts(rng))}, {"user", "u"}, {"content", "x"}}.dump() + "\n";
  }
  const auto stats = ingest_string(text, dir.path());
  const auto store = CorpusStore::open(dir.path());
  for (auto g : {Granularity::day, Granularity::week, Granularity::month}) {
    const auto buckets = time_buckets(store, g);
    std::set<TweetId> seen;
    std::size_t total = 0;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      if (b > 0) {
        EXPECT_LT(buckets[b - 1].bucket_start, buckets[b].bucket_start);
      }
      total += buckets[b].doc_ids.size();
      for (auto id : buckets[b].doc_ids) EXPECT_TRUE(seen.insert(id).second);
    }
    EXPECT_EQ(total, stats.records_kept);
  }
}
