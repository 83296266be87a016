#pragma once

// Precomputed sentence-embedding files.
//
// Layout, all little-endian:
//   offset 0   magic   "FSEM"
//   offset 4   version u32 = 1
//   offset 8   dim     u32
//   offset 12  count   u64
//   offset 20  count records of { tweet_id u64 | dim x f32 }
// The file size is exactly 20 + count * (8 + 4 * dim).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "futopic/binio.hpp"
#include "futopic/corpus.hpp"
#include "futopic/error.hpp"

namespace futopic::embed {

inline constexpr std::uint64_t kHeaderBytes = 20;
inline constexpr std::uint32_t kVersion = 1;

struct EmbeddingFileHeader {
  std::uint32_t version = kVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;

  std::uint64_t record_bytes() const { return 8 + 4ull * dim; }
  std::uint64_t file_bytes() const { return kHeaderBytes + count * record_bytes(); }
};

struct EmbeddingRecord {
  std::uint64_t tweet_id = 0;
  std::vector<float> vector;
};

class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw IoError("cannot open embedding file " + path.string());
    std::string magic(4, '\0');
    in_.read(magic.data(), 4);
    if (in_.gcount() != 4 || magic != "FSEM") throw FormatError("unsupported format: bad magic in " + path.string());
    std::uint32_t version = 0;
    if (!binio::try_get_le(in_, version, "version") || version != kVersion) {
      throw FormatError("unsupported format: version " + std::to_string(version) + " in " + path.string());
    }
    header_.version = version;
    try {
      header_.dim = binio::get_le<std::uint32_t>(in_, "dim");
      header_.count = binio::get_le<std::uint64_t>(in_, "count");
    } catch (const FormatError&) {
      throw FormatError("truncated file: header of " + path.string());
    }
    const auto size = std::filesystem::file_size(path);
    if (size != header_.file_bytes()) {
      throw FormatError("truncated file: " + path.string() + " has " + std::to_string(size) +
                        " bytes, header implies " + std::to_string(header_.file_bytes()));
    }
    buf_.resize(header_.record_bytes());
  }

  const EmbeddingFileHeader& header() const { return header_; }
  std::uint32_t dim() const { return header_.dim; }
  std::uint64_t count() const { return header_.count; }
  std::uint64_t position() const { return next_; }

  // Streams the next record in file order; false at end.
  bool next(EmbeddingRecord& rec) {
    if (next_ >= header_.count) return false;
    in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (static_cast<std::size_t>(in_.gcount()) != buf_.size()) {
      throw FormatError("truncated file: record " + std::to_string(next_) + " of " + path_.string());
    }
    rec.tweet_id = binio::decode_le<std::uint64_t>(buf_.data());
    rec.vector.resize(header_.dim);
    for (std::uint32_t d = 0; d < header_.dim; ++d) {
      const float x = std::bit_cast<float>(binio::decode_le<std::uint32_t>(buf_.data() + 8 + 4 * d));
      if (!std::isfinite(x)) {
        throw FormatError("non-finite value in record " + std::to_string(next_) + " (dimension " +
                          std::to_string(d) + ") of " + path_.string());
      }
      rec.vector[d] = x;
    }
    ++next_;
    return true;
  }

  void seek(std::uint64_t index) {
    if (index >= header_.count) throw InvalidArgument("embedding record index out of range");
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(kHeaderBytes + index * header_.record_bytes()));
    next_ = index;
  }

  void rewind() {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(kHeaderBytes));
    next_ = 0;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  EmbeddingFileHeader header_;
  std::vector<unsigned char> buf_;
  std::uint64_t next_ = 0;
};

// Streaming writer; the record count is patched into the header on close.
class EmbeddingWriter {
 public:
  EmbeddingWriter(const std::filesystem::path& path, std::uint32_t dim) : path_(path), dim_(dim) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot write embedding file " + path.string());
    out_.write("FSEM", 4);
    binio::put_le<std::uint32_t>(out_, kVersion);
    binio::put_le<std::uint32_t>(out_, dim_);
    binio::put_le<std::uint64_t>(out_, 0);
  }
  ~EmbeddingWriter() {
    if (out_.is_open()) {
      try {
        close();
      } catch (...) {
      }
    }
  }
  EmbeddingWriter(const EmbeddingWriter&) = delete;
  EmbeddingWriter& operator=(const EmbeddingWriter&) = delete;

  void write(std::uint64_t id, std::span<const float> v) {
    if (v.size() != dim_) {
      throw InvalidArgument("dimension mismatch: record " + std::to_string(count_) + " has " +
                            std::to_string(v.size()) + " values, expected " + std::to_string(dim_));
    }
    for (float x : v) {
      if (!std::isfinite(x)) throw InvalidArgument("non-finite value in record " + std::to_string(count_));
    }
    binio::put_le<std::uint64_t>(out_, id);
    for (float x : v) binio::put_f32(out_, x);
    ++count_;
  }

  std::uint64_t close() {
    out_.seekp(12);
    binio::put_le<std::uint64_t>(out_, count_);
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
    return EmbeddingFileHeader{kVersion, dim_, count_}.file_bytes();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint32_t dim_;
  std::uint64_t count_ = 0;
};

inline std::uint64_t write_embeddings(std::span<const EmbeddingRecord> records, std::uint32_t dim,
                                      const std::filesystem::path& path) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != dim) {
      throw InvalidArgument("dimension mismatch: record " + std::to_string(i) + " has " +
                            std::to_string(records[i].vector.size()) + " values, expected " + std::to_string(dim));
    }
  }
  EmbeddingWriter w(path, dim);
  for (const auto& r : records) w.write(r.tweet_id, r.vector);
  return w.close();
}

struct AlignmentReport {
  std::uint64_t corpus_count = 0;
  std::uint64_t embedding_count = 0;
  std::uint64_t missing = 0;     // corpus ids with no embedding
  std::uint64_t extra = 0;       // embedding ids not in the corpus
  std::uint64_t duplicates = 0;  // repeated ids inside the embedding file
  bool ordered = false;          // same ids in the same order
  std::vector<std::uint64_t> missing_sample;
  std::vector<std::uint64_t> extra_sample;

  bool aligned() const { return missing == 0 && extra == 0 && duplicates == 0; }

  nlohmann::json to_json() const {
    return {{"corpus_count", corpus_count}, {"embedding_count", embedding_count},
            {"missing", missing},           {"extra", extra},
            {"duplicates", duplicates},     {"ordered", ordered},
            {"aligned", aligned()},         {"missing_sample", missing_sample},
            {"extra_sample", extra_sample}};
  }
};

inline AlignmentReport validate_alignment(const CorpusStore& store, const std::filesystem::path& embeddings) {
  constexpr std::size_t kSample = 10;
  AlignmentReport rep;
  EmbeddingReader reader(embeddings);
  auto corpus = store.reader();
  std::vector<std::uint64_t> corpus_ids;
  std::vector<std::uint64_t> emb_ids;
  corpus_ids.reserve(store.size());
  emb_ids.reserve(reader.count());
  TweetRecord r;
  while (corpus.next(r)) corpus_ids.push_back(r.id);
  EmbeddingRecord e;
  while (reader.next(e)) emb_ids.push_back(e.tweet_id);
  rep.corpus_count = corpus_ids.size();
  rep.embedding_count = emb_ids.size();
  rep.ordered = corpus_ids == emb_ids;

  std::sort(corpus_ids.begin(), corpus_ids.end());
  std::sort(emb_ids.begin(), emb_ids.end());
  const auto uniq_end = std::unique(emb_ids.begin(), emb_ids.end());
  rep.duplicates = static_cast<std::uint64_t>(emb_ids.end() - uniq_end);
  emb_ids.erase(uniq_end, emb_ids.end());
  std::size_t i = 0, j = 0;
  while (i < corpus_ids.size() || j < emb_ids.size()) {
    if (j == emb_ids.size() || (i < corpus_ids.size() && corpus_ids[i] < emb_ids[j])) {
      if (rep.missing_sample.size() < kSample) rep.missing_sample.push_back(corpus_ids[i]);
      ++rep.missing;
      ++i;
    } else if (i == corpus_ids.size() || emb_ids[j] < corpus_ids[i]) {
      if (rep.extra_sample.size() < kSample) rep.extra_sample.push_back(emb_ids[j]);
      ++rep.extra;
      ++j;
    } else {
      ++i;
      ++j;
    }
  }
  if (rep.duplicates > 0) rep.ordered = false;
  return rep;
}

// Sorted (tweet_id u64, record index u64) pairs persisted next to the
// embedding file, so misordered files can be joined to the corpus by id with
// one seek per lookup.
class EmbeddingIndex {
 public:
  static std::filesystem::path default_path(const std::filesystem::path& embeddings) {
    auto p = embeddings;
    p += ".idx";
    return p;
  }

  static void build(const std::filesystem::path& embeddings, const std::filesystem::path& index_path) {
    EmbeddingReader reader(embeddings);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> entries;
    entries.reserve(reader.count());
    EmbeddingRecord rec;
    while (reader.next(rec)) entries.emplace_back(rec.tweet_id, reader.position() - 1);
    std::sort(entries.begin(), entries.end());
    std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write embedding index " + index_path.string());
    for (auto [id, idx] : entries) {
      binio::put_le<std::uint64_t>(out, id);
      binio::put_le<std::uint64_t>(out, idx);
    }
    if (!out) throw IoError("failed writing " + index_path.string());
  }

  explicit EmbeddingIndex(const std::filesystem::path& index_path) : path_(index_path) {
    in_.open(index_path, std::ios::binary);
    if (!in_) throw IoError("cannot open embedding index " + index_path.string());
    const auto size = std::filesystem::file_size(index_path);
    if (size % 16 != 0) throw FormatError("corrupt embedding index " + index_path.string());
    entries_ = size / 16;
  }

  std::optional<std::uint64_t> find(std::uint64_t id) {
    std::uint64_t lo = 0, hi = entries_;
    while (lo < hi) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      const auto [key, idx] = entry(mid);
      if (key == id) return idx;
      if (key < id) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return std::nullopt;
  }

 private:
  std::pair<std::uint64_t, std::uint64_t> entry(std::uint64_t i) {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(i * 16));
    const auto key = binio::get_le<std::uint64_t>(in_, "index key");
    const auto idx = binio::get_le<std::uint64_t>(in_, "index value");
    return {key, idx};
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t entries_ = 0;
};

}  // namespace futopic::embed
