#pragma once

// Labels file: (tweet_id u64, label u32) little-endian pairs in corpus order,
// no header.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "futopic/binio.hpp"
#include "futopic/error.hpp"

namespace futopic {

struct LabelEntry {
  std::uint64_t doc_id = 0;
  std::uint32_t label = 0;
  bool operator==(const LabelEntry&) const = default;
};

inline void write_labels(const std::filesystem::path& path, const std::vector<LabelEntry>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write labels " + path.string());
  for (const auto& e : labels) {
    binio::put_le<std::uint64_t>(out, e.doc_id);
    binio::put_le<std::uint32_t>(out, e.label);
  }
  if (!out) throw IoError("failed writing labels " + path.string());
}

// Streams labels to disk as they are produced.
class LabelWriter {
 public:
  explicit LabelWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write labels " + path.string());
  }
  void operator()(const LabelEntry& e) {
    binio::put_le<std::uint64_t>(out_, e.doc_id);
    binio::put_le<std::uint32_t>(out_, e.label);
  }
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing labels " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline std::vector<LabelEntry> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open labels " + path.string());
  const auto size = std::filesystem::file_size(path);
  if (size % 12 != 0) throw FormatError("labels file " + path.string() + " is not a whole number of records");
  std::vector<LabelEntry> out(size / 12);
  for (auto& e : out) {
    e.doc_id = binio::get_le<std::uint64_t>(in, "doc id");
    e.label = binio::get_le<std::uint32_t>(in, "label");
  }
  return out;
}

// Sequential lookup for a labels file read alongside the corpus. Lookups in
// file order cost one read each; the first out-of-order id loads a full id map.
class LabelCursor {
 public:
  explicit LabelCursor(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open labels " + path.string());
    const auto size = std::filesystem::file_size(path);
    if (size % 12 != 0) throw FormatError("labels file " + path.string() + " is not a whole number of records");
    count_ = size / 12;
  }

  std::uint64_t size() const { return count_; }

  std::optional<std::uint32_t> find(std::uint64_t doc_id) {
    if (!map_) {
      if (read_ < count_) {
        LabelEntry e{binio::get_le<std::uint64_t>(in_, "doc id"), binio::get_le<std::uint32_t>(in_, "label")};
        ++read_;
        if (e.doc_id == doc_id) return e.label;
      }
      load_map();
    }
    auto it = map_->find(doc_id);
    if (it == map_->end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t require(std::uint64_t doc_id) {
    auto l = find(doc_id);
    if (!l) throw Error("document " + std::to_string(doc_id) + " has no label in " + path_.string());
    return *l;
  }

 private:
  void load_map() {
    map_.emplace();
    for (const auto& e : read_labels(path_)) map_->emplace(e.doc_id, e.label);
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t count_ = 0;
  std::uint64_t read_ = 0;
  std::optional<std::unordered_map<std::uint64_t, std::uint32_t>> map_;
};

}  // namespace futopic
