#pragma once

// File I/O for the command-line tools: JSON readers for distributions and
// score laws, deterministic CSV formatting, and atomic file replacement
// (write to a sibling temp file, then rename) so partially written outputs
// can never be observed.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relfdiv/bias_lab.hpp"
#include "relfdiv/discrete.hpp"

namespace relfdiv {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline std::vector<double> json_doubles(const nlohmann::json& j, const std::string& key,
                                        const std::string& context) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw std::invalid_argument(context + ": missing array field '" + key + "'");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) {
      throw std::invalid_argument(context + ": field '" + key + "' must contain numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

// Distribution files: {"points": [...], "probs": [...]}.
inline DiscreteDist load_dist(const std::string& path) {
  const auto j = load_json_file(path);
  return make_dist(json_doubles(j, "points", path), json_doubles(j, "probs", path),
                   path.c_str());
}

// Score-law files: {"values": [...], "probs": [...]}.
inline ScoreDist load_score_dist(const std::string& path) {
  const auto j = load_json_file(path);
  ScoreDist d{json_doubles(j, "values", path), json_doubles(j, "probs", path)};
  validate_score_dist(d, path.c_str());
  return d;
}

// Score-batch files: {"real_scores": [...], "fake_scores": [...]}.
inline ScoreBatch load_score_batch(const std::string& path) {
  const auto j = load_json_file(path);
  ScoreBatch b{json_doubles(j, "real_scores", path), json_doubles(j, "fake_scores", path)};
  validate_batch(b);
  return b;
}

// Shortest-ish deterministic double formatting (12 significant digits).
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open temp file for " + path);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing temp file for " + path);
  }
  fs::rename(tmp, target);
}

// Minimal CSV assembly; all rows are joined with '\n' and the file ends with
// a newline so byte-level comparisons are stable.
class CsvBuilder {
 public:
  explicit CsvBuilder(const std::vector<std::string>& header) { add_row(header); }
  void add_row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    out_ += line;
    out_ += '\n';
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

}  // namespace relfdiv
