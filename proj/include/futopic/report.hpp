#pragma once

// Run artifacts: versioned JSON files plus a manifest carrying sizes and
// SHA-256 digests, and static HTML pages rendered from those files alone.
// Every page is a single self-contained document with inline SVG.

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "futopic/error.hpp"

namespace futopic::report {

using nlohmann::json;

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

// Keys are sorted by nlohmann::json's std::map storage; indentation fixed.
inline std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- structural validators --------------------------------------------------

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw FormatError(what);
}

inline void require_version(const json& j, const std::string& name) {
  require(j.is_object(), name + ": expected an object");
  require(j.contains("schema_version") && j["schema_version"] == 1, name + ": schema_version must be 1");
}

inline bool finite_number(const json& x) { return x.is_number() && std::isfinite(x.get<double>()); }

}  // namespace detail

inline void validate_topics(const json& j) {
  using detail::require;
  require(j.is_array(), "topics: expected an array");
  for (const auto& t : j) {
    require(t.is_object() && t.contains("topic_id") && t["topic_id"].is_number_unsigned(), "topics: topic_id");
    require(t.contains("size") && t["size"].is_number_unsigned(), "topics: size");
    require(t.contains("terms") && t["terms"].is_array(), "topics: terms");
    for (const auto& p : t["terms"]) {
      require(p.is_array() && p.size() == 2 && p[0].is_string() && detail::finite_number(p[1]),
              "topics: terms entries must be [string, number]");
    }
  }
}

inline void validate_coherence(const json& j) {
  using detail::require;
  detail::require_version(j, "coherence");
  require(j.contains("per_topic") && j["per_topic"].is_array(), "coherence: per_topic");
  require(j.contains("mean") && detail::finite_number(j["mean"]), "coherence: mean");
  for (const auto& t : j["per_topic"]) {
    require(t.is_object() && t.contains("topic_id") && t.contains("score"), "coherence: per_topic entry");
    require(t["score"].is_null() || detail::finite_number(t["score"]), "coherence: score");
  }
}

inline void validate_sweep(const json& j) {
  using detail::require;
  detail::require_version(j, "sweep");
  require(j.contains("table") && j["table"].is_array() && !j["table"].empty(), "sweep: table");
  for (const auto& r : j["table"]) {
    require(r.is_object() && r.contains("k") && r["k"].is_number_unsigned(), "sweep: k");
    require(r.contains("score") && (r["score"].is_null() || detail::finite_number(r["score"])), "sweep: score");
  }
  require(j.contains("argmax_k") && (j["argmax_k"].is_null() || j["argmax_k"].is_number_unsigned()),
          "sweep: argmax_k");
}

inline void validate_dynamics(const json& j) {
  using detail::require;
  detail::require_version(j, "dynamics");
  require(j.contains("buckets") && j["buckets"].is_array(), "dynamics: buckets");
  require(j.contains("topics") && j["topics"].is_array(), "dynamics: topics");
  require(j.contains("shares") && j["shares"].is_array() && j["shares"].size() == j["buckets"].size(),
          "dynamics: shares must have one row per bucket");
  for (const auto& row : j["shares"]) {
    require(row.is_array() && row.size() == j["topics"].size(), "dynamics: share row length");
    double sum = 0.0;
    for (const auto& x : row) {
      require(detail::finite_number(x) && x.get<double>() >= 0.0, "dynamics: shares must be non-negative");
      sum += x.get<double>();
    }
    require(sum == 0.0 || std::abs(sum - 1.0) <= 1e-9, "dynamics: non-empty rows must sum to 1");
  }
}

inline void validate_dendrogram(const json& j) {
  using detail::require;
  detail::require_version(j, "dendrogram");
  require(j.contains("leaves") && j["leaves"].is_number_unsigned(), "dendrogram: leaves");
  require(j.contains("merges") && j["merges"].is_array(), "dendrogram: merges");
  const auto leaves = j["leaves"].get<std::uint64_t>();
  require(leaves >= 1 && j["merges"].size() == leaves - 1, "dendrogram: expected leaves - 1 merges");
  double prev = 0.0;
  for (std::size_t i = 0; i < j["merges"].size(); ++i) {
    const auto& m = j["merges"][i];
    for (const char* key : {"left", "right", "node", "size"}) {
      require(m.contains(key) && m[key].is_number_unsigned(), std::string("dendrogram: merge ") + key);
    }
    require(m.contains("height") && detail::finite_number(m["height"]), "dendrogram: height");
    require(m["node"].get<std::uint64_t>() == leaves + i, "dendrogram: node ids must be sequential");
    require(m["left"].get<std::uint64_t>() < leaves + i && m["right"].get<std::uint64_t>() < leaves + i,
            "dendrogram: merge references a future node");
    require(m["height"].get<double>() >= prev, "dendrogram: heights must be non-decreasing");
    prev = m["height"].get<double>();
  }
}

inline void validate_map2d(const json& j) {
  using detail::require;
  detail::require_version(j, "map2d");
  require(j.contains("points") && j["points"].is_array(), "map2d: points");
  for (const auto& p : j["points"]) {
    require(p.is_object() && p.contains("topic_id") && p.contains("size") && p.contains("label"), "map2d: point");
    require(p.contains("x") && detail::finite_number(p["x"]) && p.contains("y") && detail::finite_number(p["y"]),
            "map2d: coordinates must be finite");
  }
}

inline void validate_manifest(const json& j) {
  using detail::require;
  detail::require_version(j, "manifest");
  require(j.contains("files") && j["files"].is_array(), "manifest: files");
  for (const auto& f : j["files"]) {
    require(f.contains("name") && f["name"].is_string(), "manifest: file name");
    require(f.contains("bytes") && f["bytes"].is_number_unsigned(), "manifest: file bytes");
    require(f.contains("sha256") && f["sha256"].is_string() && f["sha256"].get<std::string>().size() == 64,
            "manifest: file sha256");
  }
  require(j.contains("sections") && j["sections"].is_object(), "manifest: sections");
  require(j.contains("config_hash") && j["config_hash"].is_string(), "manifest: config_hash");
}

struct Section {
  const char* key;
  const char* file;
  void (*validate)(const json&);
};

inline const std::vector<Section>& sections() {
  static const std::vector<Section> s{{"topics", "topics.json", validate_topics},
                                      {"coherence", "coherence.json", validate_coherence},
                                      {"sweep", "sweep.json", validate_sweep},
                                      {"dynamics", "dynamics.json", validate_dynamics},
                                      {"dendrogram", "dendrogram.json", validate_dendrogram},
                                      {"map2d", "map2d.json", validate_map2d}};
  return s;
}

// Parses and validates one artifact; errors name the file.
inline json load_artifact(const std::filesystem::path& path, void (*validate)(const json&)) {
  json j;
  try {
    j = json::parse(read_text(path));
    validate(j);
  } catch (const json::exception& e) {
    throw FormatError("malformed artifact " + path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("malformed artifact " + path.string() + ": " + e.what());
  }
  return j;
}

// ---- JSON emission ------------------------------------------------------------

struct Artifacts {
  std::map<std::string, json> present;  // section key -> document
  json config = json::object();
  std::map<std::string, std::uint64_t> seeds;
};

inline json emit_json(const Artifacts& a, const std::filesystem::path& out_dir) {
  if (a.present.empty()) throw InvalidArgument("no artifacts to emit");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  json manifest{{"schema_version", 1}, {"files", json::array()}, {"sections", json::object()}};
  for (const auto& [key, doc] : a.present) {
    if (std::none_of(sections().begin(), sections().end(), [&](const Section& s) { return key == s.key; })) {
      throw InvalidArgument("unknown artifact section '" + key + "'");
    }
  }
  for (const auto& s : sections()) {
    auto it = a.present.find(s.key);
    if (it == a.present.end()) {
      manifest["sections"][s.key] = {{"present", false}};
      continue;
    }
    try {
      s.validate(it->second);
    } catch (const FormatError& e) {
      throw FormatError(std::string("artifact ") + s.file + " does not validate: " + e.what());
    }
    const auto text = canonical_dump(it->second);
    write_text(out_dir / s.file, text);
    manifest["sections"][s.key] = {{"present", true}, {"file", s.file}};
    manifest["files"].push_back({{"name", s.file}, {"bytes", text.size()}, {"sha256", sha256_hex(text)}});
  }
  manifest["config_hash"] = sha256_hex(canonical_dump(a.config));
  manifest["config"] = a.config;
  manifest["seeds"] = a.seeds;
  write_text(out_dir / "manifest.json", canonical_dump(manifest));
  return manifest;
}

// Recomputes sizes and digests of listed files; returns mismatching names.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  const auto manifest = load_artifact(dir / "manifest.json", validate_manifest);
  std::vector<std::string> bad;
  for (const auto& f : manifest["files"]) {
    const auto name = f["name"].get<std::string>();
    std::string text;
    try {
      text = read_text(dir / name);
    } catch (const IoError&) {
      bad.push_back(name);
      continue;
    }
    if (text.size() != f["bytes"].get<std::uint64_t>() || sha256_hex(text) != f["sha256"].get<std::string>()) {
      bad.push_back(name);
    }
  }
  return bad;
}

// ---- HTML ---------------------------------------------------------------------

namespace html {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double x, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

inline std::string color(std::size_t i) {
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  if (i < 10) return palette[i];
  // golden-angle hues beyond the base palette
  char buf[48];
  std::snprintf(buf, sizeof buf, "hsl(%d,55%%,55%%)", static_cast<int>((i * 137) % 360));
  return buf;
}

inline std::string page(const std::string& title, const std::string& body) {
  return "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" + escape(title) +
         "</title>\n<style>\nbody{font-family:sans-serif;margin:2em;color:#222}\n"
         "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 8px;text-align:left}\n"
         "svg text{font-size:11px}\nnav a{margin-right:1em}\n</style>\n</head>\n<body>\n"
         "<nav><a href=\"index.html\">index</a></nav>\n<h1>" +
         escape(title) + "</h1>\n" + body + "</body>\n</html>\n";
}

inline std::string topics_page(const json& topics) {
  std::string b = "<table>\n<tr><th>topic</th><th>size</th><th>terms</th></tr>\n";
  for (const auto& t : topics) {
    std::string terms;
    for (const auto& p : t["terms"]) {
      if (!terms.empty()) terms += ", ";
      terms += escape(p[0].get<std::string>()) + " <small>(" + num(p[1].get<double>(), 3) + ")</small>";
    }
    b += "<tr><td>" + std::to_string(t["topic_id"].get<std::uint64_t>()) + "</td><td>" +
         std::to_string(t["size"].get<std::uint64_t>()) + "</td><td>" + terms + "</td></tr>\n";
  }
  return page("Topics", b + "</table>\n");
}

inline std::string coherence_page(const std::optional<json>& coherence, const std::optional<json>& sweep) {
  std::string b;
  if (sweep) {
    const double w = 640, h = 320, pad = 50;
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : (*sweep)["table"]) {
      if (!r["score"].is_null()) pts.emplace_back(r["k"].get<double>(), r["score"].get<double>());
    }
    b += "<h2>Coherence by number of topics</h2>\n";
    if (pts.empty()) {
      b += "<p>No k produced a score.</p>\n";
    } else {
      double kmin = pts.front().first, kmax = pts.back().first;
      double smin = pts[0].second, smax = pts[0].second;
      for (const auto& [k, s] : pts) {
        smin = std::min(smin, s);
        smax = std::max(smax, s);
      }
      if (kmax == kmin) kmax = kmin + 1;
      if (smax == smin) smax = smin + 1e-3;
      auto px = [&](double k) { return pad + (k - kmin) / (kmax - kmin) * (w - 2 * pad); };
      auto py = [&](double s) { return h - pad - (s - smin) / (smax - smin) * (h - 2 * pad); };
      b += "<svg width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) + "\" role=\"img\">\n";
      b += "<line x1=\"" + num(pad) + "\" y1=\"" + num(h - pad) + "\" x2=\"" + num(w - pad) + "\" y2=\"" +
           num(h - pad) + "\" stroke=\"#888\"/>\n";
      b += "<line x1=\"" + num(pad) + "\" y1=\"" + num(pad) + "\" x2=\"" + num(pad) + "\" y2=\"" + num(h - pad) +
           "\" stroke=\"#888\"/>\n";
      std::string poly;
      for (const auto& [k, s] : pts) poly += num(px(k)) + "," + num(py(s)) + " ";
      b += "<polyline fill=\"none\" stroke=\"#4e79a7\" stroke-width=\"2\" points=\"" + poly + "\"/>\n";
      for (const auto& [k, s] : pts) {
        b += "<circle cx=\"" + num(px(k)) + "\" cy=\"" + num(py(s)) + "\" r=\"3\" fill=\"#4e79a7\"/>\n";
        b += "<text x=\"" + num(px(k)) + "\" y=\"" + num(h - pad + 16) + "\" text-anchor=\"middle\">" +
             num(k, 0) + "</text>\n";
      }
      b += "<text x=\"" + num(pad - 6) + "\" y=\"" + num(py(smax) + 4) + "\" text-anchor=\"end\">" + num(smax, 3) +
           "</text>\n<text x=\"" + num(pad - 6) + "\" y=\"" + num(py(smin) + 4) + "\" text-anchor=\"end\">" +
           num(smin, 3) + "</text>\n";
      if (!(*sweep)["argmax_k"].is_null()) {
        const double k = (*sweep)["argmax_k"].get<double>();
        double s = 0;
        for (const auto& p : pts) {
          if (p.first == k) s = p.second;
        }
        b += "<circle class=\"argmax\" data-k=\"" + num(k, 0) + "\" cx=\"" + num(px(k)) + "\" cy=\"" + num(py(s)) +
             "\" r=\"7\" fill=\"none\" stroke=\"#e15759\" stroke-width=\"2\"/>\n";
        b += "<text x=\"" + num(px(k)) + "\" y=\"" + num(py(s) - 12) + "\" text-anchor=\"middle\" fill=\"#e15759\">k = " +
             num(k, 0) + "</text>\n";
      }
      b += "</svg>\n<table>\n<tr><th>k</th><th>C_V</th></tr>\n";
      for (const auto& r : (*sweep)["table"]) {
        b += "<tr><td>" + std::to_string(r["k"].get<std::uint64_t>()) + "</td><td>" +
             (r["score"].is_null() ? std::string("failed") : num(r["score"].get<double>(), 4)) + "</td></tr>\n";
      }
      b += "</table>\n";
    }
  }
  if (coherence) {
    b += "<h2>Per-topic coherence</h2>\n<p>Mean C_V: " + num((*coherence)["mean"].get<double>(), 4) +
         "</p>\n<table>\n<tr><th>topic</th><th>C_V</th><th>words</th></tr>\n";
    for (const auto& t : (*coherence)["per_topic"]) {
      std::string words;
      for (const auto& w : t.value("words", json::array())) words += escape(w.get<std::string>()) + " ";
      b += "<tr><td>" + std::to_string(t["topic_id"].get<std::uint64_t>()) + "</td><td>" +
           (t["score"].is_null() ? std::string("excluded") : num(t["score"].get<double>(), 4)) + "</td><td>" + words +
           "</td></tr>\n";
    }
    b += "</table>\n";
  }
  return page("Coherence", b);
}

inline std::string dynamics_page(const json& d) {
  const auto& shares = d["shares"];
  const std::size_t nb = shares.size();
  const std::size_t nt = d["topics"].size();
  const double w = 720, h = 360, pad = 40;
  const double bw = nb ? (w - 2 * pad) / static_cast<double>(nb) : 0.0;
  std::string b = "<svg width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) + "\" role=\"img\">\n";
  for (std::size_t i = 0; i < nb; ++i) {
    double y = h - pad;
    for (std::size_t t = 0; t < nt; ++t) {
      const double share = shares[i][t].get<double>();
      if (share <= 0.0) continue;
      const double hh = share * (h - 2 * pad);
      y -= hh;
      b += "<rect class=\"band\" x=\"" + num(pad + bw * static_cast<double>(i)) + "\" y=\"" + num(y) + "\" width=\"" +
           num(bw) + "\" height=\"" + num(hh) + "\" fill=\"" + color(t) + "\"><title>topic " + std::to_string(t) +
           ": " + num(share, 3) + "</title></rect>\n";
    }
  }
  const std::size_t step = std::max<std::size_t>(1, nb / 12);
  for (std::size_t i = 0; i < nb; i += step) {
    b += "<text x=\"" + num(pad + bw * (static_cast<double>(i) + 0.5)) + "\" y=\"" + num(h - pad + 14) +
         "\" text-anchor=\"middle\">" + escape(d["buckets"][i].get<std::string>()) + "</text>\n";
  }
  b += "</svg>\n<p>";
  for (std::size_t t = 0; t < nt; ++t) {
    b += "<span style=\"color:" + color(t) + "\">&#9632;</span> topic " + std::to_string(t) + " ";
  }
  return page("Topic dynamics", b + "</p>\n");
}

inline std::string map_page(const json& m) {
  const auto& pts = m["points"];
  const double w = 640, h = 640, pad = 60;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0, smax = 1;
  bool first = true;
  for (const auto& p : pts) {
    const double x = p["x"].get<double>(), y = p["y"].get<double>();
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    }
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    smax = std::max(smax, p["size"].get<double>());
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double rmax = 40;
  std::string b = "<svg width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) + "\" role=\"img\">\n";
  b += "<line x1=\"" + num(w / 2) + "\" y1=\"" + num(pad / 2) + "\" x2=\"" + num(w / 2) + "\" y2=\"" + num(h - pad / 2) +
       "\" stroke=\"#ddd\"/>\n<line x1=\"" + num(pad / 2) + "\" y1=\"" + num(h / 2) + "\" x2=\"" + num(w - pad / 2) +
       "\" y2=\"" + num(h / 2) + "\" stroke=\"#ddd\"/>\n";
  for (const auto& p : pts) {
    const double cx = pad + (p["x"].get<double>() - xmin) / (xmax - xmin) * (w - 2 * pad);
    const double cy = h - pad - (p["y"].get<double>() - ymin) / (ymax - ymin) * (h - 2 * pad);
    // area proportional to size
    const double r = std::max(2.0, rmax * std::sqrt(p["size"].get<double>() / smax));
    b += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
         "\" fill=\"#4e79a7\" fill-opacity=\"0.45\" stroke=\"#2b4c6f\"><title>" +
         escape(std::to_string(p["topic_id"].get<std::uint64_t>()) + ": " + p["label"].get<std::string>()) +
         "</title></circle>\n<text x=\"" + num(cx) + "\" y=\"" + num(cy + 4) + "\" text-anchor=\"middle\">" +
         std::to_string(p["topic_id"].get<std::uint64_t>()) + "</text>\n";
  }
  return page("Inter-topic distance map", b + "</svg>\n");
}

inline std::string dendrogram_page(const json& d) {
  const auto leaves = d["leaves"].get<std::size_t>();
  const auto& merges = d["merges"];
  const std::size_t nodes = 2 * leaves - 1;
  std::vector<std::pair<std::size_t, std::size_t>> children(nodes, {nodes, nodes});
  std::vector<double> height(nodes, 0.0);
  for (const auto& m : merges) {
    const auto n = m["node"].get<std::size_t>();
    children[n] = {m["left"].get<std::size_t>(), m["right"].get<std::size_t>()};
    height[n] = m["height"].get<double>();
  }
  // leaf order from an iterative depth-first walk of the root
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{nodes - 1};
  while (!stack.empty()) {
    const auto n = stack.back();
    stack.pop_back();
    if (n < leaves) {
      order.push_back(n);
    } else {
      stack.push_back(children[n].second);
      stack.push_back(children[n].first);
    }
  }
  const double w = std::max(320.0, 18.0 * static_cast<double>(leaves) + 80), h = 360, pad = 40;
  const double hmax = std::max(height[nodes - 1], 1e-9);
  std::vector<double> x(nodes, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    x[order[i]] = pad + (static_cast<double>(i) + 0.5) * (w - 2 * pad) / static_cast<double>(leaves);
  }
  auto y = [&](std::size_t n) { return h - pad - height[n] / hmax * (h - 2 * pad); };
  std::string b = "<svg width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) + "\" role=\"img\">\n";
  for (std::size_t n = leaves; n < nodes; ++n) {
    const auto [l, r] = children[n];
    x[n] = (x[l] + x[r]) / 2;
    b += "<path class=\"merge\" d=\"M" + num(x[l]) + "," + num(y(l)) + " V" + num(y(n)) + " H" + num(x[r]) + " V" +
         num(y(r)) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    b += "<text x=\"" + num(x[order[i]]) + "\" y=\"" + num(h - pad + 14) + "\" text-anchor=\"middle\">" +
         std::to_string(order[i]) + "</text>\n";
  }
  b += "</svg>\n<p>Average linkage on 1 - cosine distance; top merge height " + num(height[nodes - 1], 4) + ".</p>\n";
  return page("Topic hierarchy", b);
}

}  // namespace html

// Renders pages for every section present in the manifest of `dir`.
inline std::vector<std::string> emit_html(const std::filesystem::path& dir) {
  const auto manifest = load_artifact(dir / "manifest.json", validate_manifest);
  std::map<std::string, json> docs;
  for (const auto& s : sections()) {
    const auto& sec = manifest["sections"].value(s.key, json::object());
    if (sec.value("present", false)) docs[s.key] = load_artifact(dir / s.file, s.validate);
  }
  std::vector<std::pair<std::string, std::string>> pages;
  if (docs.count("topics")) pages.emplace_back("topics.html", html::topics_page(docs["topics"]));
  if (docs.count("coherence") || docs.count("sweep")) {
    std::optional<json> c, s;
    if (docs.count("coherence")) c = docs["coherence"];
    if (docs.count("sweep")) s = docs["sweep"];
    pages.emplace_back("coherence.html", html::coherence_page(c, s));
  }
  if (docs.count("dynamics")) pages.emplace_back("dynamics.html", html::dynamics_page(docs["dynamics"]));
  if (docs.count("map2d")) pages.emplace_back("map.html", html::map_page(docs["map2d"]));
  if (docs.count("dendrogram")) pages.emplace_back("dendrogram.html", html::dendrogram_page(docs["dendrogram"]));

  std::string body = "<ul>\n";
  for (const auto& [name, content] : pages) {
    write_text(dir / name, content);
    body += "<li><a href=\"" + name + "\">" + name.substr(0, name.size() - 5) + "</a></li>\n";
  }
  body += "</ul>\n<h2>Sections</h2>\n<table>\n<tr><th>section</th><th>status</th></tr>\n";
  for (const auto& s : sections()) {
    body += std::string("<tr><td>") + s.key + "</td><td>" + (docs.count(s.key) ? "present" : "absent") + "</td></tr>\n";
  }
  body += "</table>\n<p>Config hash: <code>" + html::escape(manifest["config_hash"].get<std::string>()) + "</code></p>\n";
  write_text(dir / "index.html", html::page("Topic model report", body));
  std::vector<std::string> names{"index.html"};
  for (const auto& p : pages) names.push_back(p.first);
  return names;
}

}  // namespace futopic::report
