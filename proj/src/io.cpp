#include "alignlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace alignlab {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header)
    : n_cols_(header.size()) {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i > 0) os << ',';
    os << header[i];
  }
  header_line_ = os.str();
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  require(cells.size() == n_cols_, "csv row width mismatch");
  std::ostringstream os;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) os << ',';
    os << cells[i];
  }
  rows_.push_back(os.str());
}

std::string CsvWriter::to_string() const {
  std::ostringstream os;
  os << header_line_ << '\n';
  for (const auto& r : rows_) os << r << '\n';
  return os.str();
}

void CsvWriter::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_string();
}

void write_samples_csv(const SampleSet& samples, const std::string& path) {
  std::vector<std::string> header;
  for (Eigen::Index d = 0; d < samples.cols(); ++d)
    header.push_back("x" + std::to_string(d + 1));
  CsvWriter csv(header);
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < samples.cols(); ++c)
      row.push_back(format_double(samples(r, c)));
    csv.add_row(row);
  }
  csv.save(path);
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("config: unterminated section header", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError("config: empty section", lineno);
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config: expected 'key = value'", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("config: empty key", lineno);
    if (section.empty())
      throw ParseError("config: key outside any [section]", lineno);
    cfg.kv_[section + "." + key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  require(dotted_key.find('.') != std::string::npos,
          "config keys must be section.key: " + dotted_key);
  kv_[dotted_key] = value;
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  double v = 0.0;
  const std::string& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ContractError("config: '" + key + "' is not a number: " + s);
  return v;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ContractError("config: '" + key + "' is not an integer: " +
                        it->second);
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw ContractError("config: '" + key + "' is not an integer: " +
                        it->second);
  }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ContractError("config: '" + key + "' is not a boolean: " + it->second);
}

std::vector<int> RunConfig::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  std::stringstream ss(it->second);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : kv_) os << k << " = " << v << '\n';
  return os.str();
}

std::uint64_t RunConfig::hash() const {
  // FNV-1a over the canonical dump.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canonical_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize_filename(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  return out;
}

}  // namespace alignlab
