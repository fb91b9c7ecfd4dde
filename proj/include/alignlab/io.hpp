#pragma once

#include "alignlab/common.hpp"

#include <map>
#include <string>
#include <vector>

namespace alignlab {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

// Simple CSV table with a fixed header; numeric cells are rendered with
// format_double so identical runs produce byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);
  std::string cell(double v) const { return format_double(v); }
  std::string cell(int v) const { return std::to_string(v); }
  const std::string& header_line() const { return header_line_; }
  std::string to_string() const;
  void save(const std::string& path) const;

 private:
  std::string header_line_;
  size_t n_cols_;
  std::vector<std::string> rows_;
};

void write_samples_csv(const SampleSet& samples, const std::string& path);

// Sectioned key-value run configuration:
//
//   # comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key". "--set section.key=value" overrides.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig from_file(const std::string& path);
  static RunConfig from_string(const std::string& text);

  void set(const std::string& dotted_key, const std::string& value);
  bool has(const std::string& dotted_key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  // Canonical "key = value" dump, sorted by key; used for manifests and
  // config hashing.
  std::string canonical_text() const;
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

std::string sanitize_filename(const std::string& name);

}  // namespace alignlab
