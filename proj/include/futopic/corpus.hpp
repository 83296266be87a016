#pragma once

// Archived-tweet ingestion into a compact binary corpus store, plus ordered
// batch streaming and calendar bucketing over that store.
//
// Store layout (directory):
//   records.bin    repeated { id u64 | created_at i64 | author_len u32 |
//                             text_len u32 | author bytes | text bytes },
//                  all integers little-endian, records in ingest order
//   manifest.json  schema version, record count, byte size of records.bin,
//                  date range, ingest window and CorpusStats
// The manifest is written last; a directory without one is not a store.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "futopic/binio.hpp"
#include "futopic/error.hpp"
#include "futopic/timeutil.hpp"

namespace futopic {

using TweetId = std::uint64_t;

struct TweetRecord {
  TweetId id = 0;
  std::string author;
  UnixSeconds created_at = 0;
  std::string text;

  bool operator==(const TweetRecord&) const = default;
};

struct CorpusStats {
  std::uint64_t lines_read = 0;
  std::uint64_t records_kept = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t malformed_dropped = 0;
  std::uint64_t out_of_range_dropped = 0;
  std::uint64_t distinct_authors = 0;
  std::optional<UnixSeconds> min_date;
  std::optional<UnixSeconds> max_date;

  bool balanced() const {
    return lines_read == records_kept + duplicates_dropped + malformed_dropped + out_of_range_dropped;
  }
  bool operator==(const CorpusStats&) const = default;
};

inline void to_json(nlohmann::json& j, const CorpusStats& s) {
  j = nlohmann::json{{"lines_read", s.lines_read},
                     {"records_kept", s.records_kept},
                     {"duplicates_dropped", s.duplicates_dropped},
                     {"malformed_dropped", s.malformed_dropped},
                     {"out_of_range_dropped", s.out_of_range_dropped},
                     {"distinct_authors", s.distinct_authors},
                     {"min_date", s.min_date ? nlohmann::json(*s.min_date) : nlohmann::json(nullptr)},
                     {"max_date", s.max_date ? nlohmann::json(*s.max_date) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, CorpusStats& s) {
  j.at("lines_read").get_to(s.lines_read);
  j.at("records_kept").get_to(s.records_kept);
  j.at("duplicates_dropped").get_to(s.duplicates_dropped);
  j.at("malformed_dropped").get_to(s.malformed_dropped);
  j.at("out_of_range_dropped").get_to(s.out_of_range_dropped);
  j.at("distinct_authors").get_to(s.distinct_authors);
  s.min_date = j.at("min_date").is_null() ? std::nullopt : std::optional<UnixSeconds>(j.at("min_date").get<UnixSeconds>());
  s.max_date = j.at("max_date").is_null() ? std::nullopt : std::optional<UnixSeconds>(j.at("max_date").get<UnixSeconds>());
}

inline constexpr int kCorpusSchemaVersion = 1;
inline constexpr const char* kRecordsFile = "records.bin";
inline constexpr const char* kManifestFile = "manifest.json";

// Inclusive calendar-day window, interpreted in UTC.
struct DateWindow {
  std::chrono::sys_days since;
  std::chrono::sys_days until;

  UnixSeconds begin() const { return to_unix(since); }
  UnixSeconds end_exclusive() const { return to_unix(until + std::chrono::days{1}); }
  bool contains(UnixSeconds t) const { return t >= begin() && t < end_exclusive(); }
};

// Called once per skipped malformed line with its 1-based line number.
using MalformedSink = std::function<void(std::uint64_t line_no, const std::string& reason)>;

inline MalformedSink stderr_sink() {
  return [](std::uint64_t line_no, const std::string& reason) {
    std::cerr << "ingest: line " << line_no << ": " << reason << '\n';
  };
}

namespace detail {

inline void write_record(std::ostream& out, const TweetRecord& r) {
  binio::put_le<std::uint64_t>(out, r.id);
  binio::put_le<std::int64_t>(out, r.created_at);
  binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.author.size()));
  binio::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.text.size()));
  out.write(r.author.data(), static_cast<std::streamsize>(r.author.size()));
  out.write(r.text.data(), static_cast<std::streamsize>(r.text.size()));
}

inline std::uint64_t record_bytes(const TweetRecord& r) { return 24 + r.author.size() + r.text.size(); }

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline const nlohmann::json* first_of(const nlohmann::json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

// Returns the record, or sets `reason` and returns nullopt.
inline std::optional<TweetRecord> parse_line(std::string_view line, std::string& reason) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    reason = "invalid JSON";
    return std::nullopt;
  }
  if (!j.is_object()) {
    reason = "not a JSON object";
    return std::nullopt;
  }
  TweetRecord r;

  const auto* id = first_of(j, {"id"});
  if (id == nullptr) {
    reason = "missing id";
    return std::nullopt;
  }
  if (id->is_number_unsigned()) {
    r.id = id->get<std::uint64_t>();
  } else if (id->is_number_integer() && id->get<std::int64_t>() >= 0) {
    r.id = static_cast<std::uint64_t>(id->get<std::int64_t>());
  } else if (id->is_string()) {
    const auto& s = id->get_ref<const std::string&>();
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r.id);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      reason = "id is not an unsigned 64-bit integer";
      return std::nullopt;
    }
  } else {
    reason = "id is not an unsigned 64-bit integer";
    return std::nullopt;
  }

  const auto* date = first_of(j, {"date", "created_at"});
  if (date == nullptr) {
    reason = "missing date";
    return std::nullopt;
  }
  std::optional<UnixSeconds> ts;
  if (date->is_string()) {
    ts = parse_timestamp(date->get_ref<const std::string&>());
  } else if (date->is_number_integer()) {
    ts = date->get<std::int64_t>();
  }
  if (!ts) {
    reason = "unparseable date";
    return std::nullopt;
  }
  r.created_at = *ts;

  const auto* user = first_of(j, {"user", "author"});
  if (user != nullptr && user->is_object()) user = first_of(*user, {"username", "screen_name"});
  if (user == nullptr || !user->is_string()) {
    reason = "missing author";
    return std::nullopt;
  }
  r.author = user->get<std::string>();

  const auto* text = first_of(j, {"content", "text"});
  if (text == nullptr || !text->is_string()) {
    reason = "missing text";
    return std::nullopt;
  }
  r.text = text->get<std::string>();
  if (trim(r.text).empty()) {
    reason = "empty text";
    return std::nullopt;
  }
  return r;
}

}  // namespace detail

// Reads newline-delimited JSON from `input` and persists kept records under
// `store_dir`. Checks run in the order parse, window, duplicate; only
// in-window records claim an id, and the first claim wins.
inline CorpusStats ingest_jsonl(std::istream& input, const DateWindow& window,
                                const std::filesystem::path& store_dir,
                                const MalformedSink& on_malformed = stderr_sink()) {
  if (window.since > window.until) throw InvalidArgument("--since must not be after --until");
  if (!input) throw IoError("ingest: input stream is not readable");
  std::error_code ec;
  std::filesystem::create_directories(store_dir, ec);
  if (ec) throw IoError("cannot create store directory " + store_dir.string() + ": " + ec.message());
  std::filesystem::remove(store_dir / kManifestFile, ec);

  const auto records_path = store_dir / kRecordsFile;
  std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + records_path.string());

  CorpusStats stats;
  std::unordered_set<TweetId> seen_ids;
  std::unordered_set<std::string> authors;
  std::uint64_t bytes = 0;
  std::string line;
  std::string reason;
  while (std::getline(input, line)) {
    ++stats.lines_read;
    auto rec = detail::parse_line(line, reason);
    if (!rec) {
      ++stats.malformed_dropped;
      if (on_malformed) on_malformed(stats.lines_read, reason);
      continue;
    }
    if (!window.contains(rec->created_at)) {
      ++stats.out_of_range_dropped;
      continue;
    }
    if (!seen_ids.insert(rec->id).second) {
      ++stats.duplicates_dropped;
      continue;
    }
    ++stats.records_kept;
    authors.insert(rec->author);
    stats.min_date = std::min(stats.min_date.value_or(rec->created_at), rec->created_at);
    stats.max_date = std::max(stats.max_date.value_or(rec->created_at), rec->created_at);
    detail::write_record(out, *rec);
    bytes += detail::record_bytes(*rec);
  }
  if (input.bad()) throw IoError("ingest: read error after line " + std::to_string(stats.lines_read));
  out.close();
  if (!out) throw IoError("failed writing " + records_path.string());
  stats.distinct_authors = authors.size();

  nlohmann::json manifest{{"schema_version", kCorpusSchemaVersion},
                          {"format", "futopic-corpus"},
                          {"records_file", kRecordsFile},
                          {"record_count", stats.records_kept},
                          {"records_bytes", bytes},
                          {"window", {{"since", format_date(window.begin())},
                                      {"until", format_date(to_unix(window.until))}}},
                          {"stats", stats}};
  const auto manifest_path = store_dir / kManifestFile;
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw IoError("cannot write " + manifest_path.string());
  mf << manifest.dump(2) << '\n';
  if (!mf) throw IoError("failed writing " + manifest_path.string());
  return stats;
}

inline CorpusStats ingest_jsonl_file(const std::filesystem::path& input, const DateWindow& window,
                                     const std::filesystem::path& store_dir,
                                     const MalformedSink& on_malformed = stderr_sink()) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot open input " + input.string());
  return ingest_jsonl(in, window, store_dir, on_malformed);
}

// Read-only handle on a persisted store. Cheap to copy; every stream opens its
// own file handle so concurrent readers do not interfere.
class CorpusStore {
 public:
  static CorpusStore open(const std::filesystem::path& dir) {
    CorpusStore store;
    store.dir_ = dir;
    const auto manifest_path = dir / kManifestFile;
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("corpus store missing manifest: " + manifest_path.string());
    nlohmann::json m = nlohmann::json::parse(mf, nullptr, false);
    if (m.is_discarded() || !m.is_object()) throw FormatError("corrupt corpus manifest: " + manifest_path.string());
    try {
      if (m.at("schema_version").get<int>() != kCorpusSchemaVersion) {
        throw FormatError("unsupported corpus schema version in " + manifest_path.string());
      }
      store.count_ = m.at("record_count").get<std::uint64_t>();
      store.bytes_ = m.at("records_bytes").get<std::uint64_t>();
      store.stats_ = m.at("stats").get<CorpusStats>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("corrupt corpus manifest " + manifest_path.string() + ": " + e.what());
    }
    const auto rp = dir / kRecordsFile;
    std::error_code ec;
    const auto size = std::filesystem::file_size(rp, ec);
    if (ec) throw IoError("corpus store missing records: " + rp.string());
    if (size != store.bytes_) {
      throw FormatError("corpus records size mismatch (" + std::to_string(size) + " vs manifest " +
                        std::to_string(store.bytes_) + "): " + rp.string());
    }
    return store;
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path records_path() const { return dir_ / kRecordsFile; }
  std::uint64_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  const CorpusStats& stats() const { return stats_; }

  class Reader {
   public:
    explicit Reader(const CorpusStore& store) : path_(store.records_path()), remaining_(store.count_) {
      in_.open(path_, std::ios::binary);
      if (!in_) throw IoError("cannot open corpus records " + path_.string());
    }

    bool next(TweetRecord& r) {
      if (remaining_ == 0) return false;
      try {
        r.id = binio::get_le<std::uint64_t>(in_, "record id");
        r.created_at = binio::get_le<std::int64_t>(in_, "record timestamp");
        const auto alen = binio::get_le<std::uint32_t>(in_, "author length");
        const auto tlen = binio::get_le<std::uint32_t>(in_, "text length");
        r.author = binio::get_bytes(in_, alen, "author");
        r.text = binio::get_bytes(in_, tlen, "text");
      } catch (const FormatError& e) {
        throw FormatError(std::string("corrupt corpus store ") + path_.string() + ": " + e.what());
      }
      --remaining_;
      return true;
    }

    // Fills `batch` with up to batch_size records; returns false when exhausted.
    bool next_batch(std::size_t batch_size, std::vector<TweetRecord>& batch) {
      batch.clear();
      TweetRecord r;
      while (batch.size() < batch_size && next(r)) batch.push_back(std::move(r));
      return !batch.empty();
    }

   private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t remaining_;
  };

  Reader reader() const { return Reader(*this); }

 private:
  std::filesystem::path dir_;
  std::uint64_t count_ = 0;
  std::uint64_t bytes_ = 0;
  CorpusStats stats_;
};

// Visits records in persisted order as batches of batch_size (last may be
// shorter). fn receives a const span-like vector reference.
template <typename Fn>
void stream_corpus(const CorpusStore& store, std::size_t batch_size, Fn&& fn) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be at least 1");
  auto reader = store.reader();
  std::vector<TweetRecord> batch;
  batch.reserve(std::min<std::uint64_t>(batch_size, store.size()));
  while (reader.next_batch(batch_size, batch)) fn(static_cast<const std::vector<TweetRecord>&>(batch));
}

struct TimeBucket {
  Granularity granularity = Granularity::month;
  UnixSeconds bucket_start = 0;
  std::vector<TweetId> doc_ids;

  bool operator==(const TimeBucket&) const = default;
};

// Continuous axis of bucket starts covering [first, last]; gap buckets included.
inline std::vector<UnixSeconds> bucket_axis(UnixSeconds first, UnixSeconds last, Granularity g) {
  std::vector<UnixSeconds> axis;
  for (UnixSeconds b = bucket_start(first, g); b <= last; b = next_bucket(b, g)) axis.push_back(b);
  return axis;
}

// Index of the bucket containing t on an axis produced by bucket_axis.
inline std::size_t bucket_index(const std::vector<UnixSeconds>& axis, UnixSeconds t) {
  auto it = std::upper_bound(axis.begin(), axis.end(), t);
  if (it == axis.begin()) throw InvalidArgument("timestamp precedes bucket axis");
  return static_cast<std::size_t>(it - axis.begin()) - 1;
}

inline std::vector<TimeBucket> time_buckets(const CorpusStore& store, Granularity g) {
  if (store.empty()) throw InvalidArgument("time_buckets needs a non-empty corpus");
  const auto& st = store.stats();
  if (!st.min_date || !st.max_date) throw FormatError("corpus manifest lacks a date range: " + store.dir().string());
  const auto axis = bucket_axis(*st.min_date, *st.max_date, g);
  std::vector<TimeBucket> buckets;
  buckets.reserve(axis.size());
  for (auto start : axis) buckets.push_back(TimeBucket{g, start, {}});
  auto reader = store.reader();
  TweetRecord r;
  while (reader.next(r)) buckets[bucket_index(axis, r.created_at)].doc_ids.push_back(r.id);
  return buckets;
}

}  // namespace futopic
