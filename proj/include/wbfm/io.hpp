#pragma once

// Serialization: the binary signal container, the CSV outputs of every
// command, and the line-oriented key=value configuration format.
//
// All CSVs use '.' as decimal separator, LF line endings, one header row,
// and 9 significant digits. Everything is written atomically (temp file +
// rename) so a crashed run never leaves a truncated artifact behind.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "wbfm/common.hpp"

namespace wbfm::io {

// ---------------------------------------------------------------------------
// formatting

inline std::string g9(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.9g", v);
  return b;
}

inline std::string g17(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

// ---------------------------------------------------------------------------
// atomic file primitives

inline void write_bytes_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw io_error("cannot open for writing: " + tmp);
  const size_t written = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
  const bool ok = written == bytes.size() && std::fclose(f) == 0;
  if (!ok) {
    std::remove(tmp.c_str());
    throw io_error("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw io_error("cannot rename into place: " + path);
  }
}

inline std::string read_file_bytes(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw io_error("cannot open: " + path);
  std::string out;
  char buf[65536];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, got);
  const bool bad = std::ferror(f);
  std::fclose(f);
  if (bad) throw io_error("read error: " + path);
  return out;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir);
}

// ---------------------------------------------------------------------------
// binary signal container: magic "WBFM", u32 length, u32 reserved, then
// little-endian (re, im) float64 pairs.

inline void put_u32_le(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64_le(std::string& s, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

inline void write_signal(const std::string& path, const cvec& x) {
  std::string s;
  s.reserve(16 + 16 * x.size());
  s += "WBFM";
  put_u32_le(s, static_cast<uint32_t>(x.size()));
  put_u32_le(s, 0);  // reserved
  s.push_back(0);    // 16-byte header: 4 magic + 4 + 4 + 4 padding
  s.push_back(0);
  s.push_back(0);
  s.push_back(0);
  for (const cplx& v : x) {
    put_f64_le(s, v.real());
    put_f64_le(s, v.imag());
  }
  write_bytes_atomic(path, s);
}

inline uint32_t get_u32_le(const std::string& s, size_t off) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

inline double get_f64_le(const std::string& s, size_t off) {
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

inline cvec read_signal(const std::string& path) {
  const std::string s = read_file_bytes(path);
  if (s.size() < 16 || s.compare(0, 4, "WBFM") != 0)
    throw io_error("not a signal file (bad magic): " + path);
  const uint32_t L = get_u32_le(s, 4);
  if (s.size() != 16 + 16ull * L) throw io_error("truncated signal file: " + path);
  cvec x(L);
  for (uint32_t t = 0; t < L; ++t)
    x[t] = cplx(get_f64_le(s, 16 + 16ull * t), get_f64_le(s, 16 + 16ull * t + 8));
  return x;
}

// CSV twin of the binary container: columns t,re,im.
inline void write_signal_csv(const std::string& path, const cvec& x) {
  std::string s = "t,re,im\n";
  for (size_t t = 0; t < x.size(); ++t)
    s += std::to_string(t) + "," + g9(x[t].real()) + "," + g9(x[t].imag()) + "\n";
  write_bytes_atomic(path, s);
}

// ---------------------------------------------------------------------------
// generic small CSV reader (numeric cells, one header row)

struct CsvTable {
  std::vector<std::string> header;
  std::vector<rvec> rows;
};

inline CsvTable read_csv(const std::string& path) {
  const std::string s = read_file_bytes(path);
  CsvTable tab;
  size_t pos = 0;
  bool first = true;
  while (pos < s.size()) {
    size_t eol = s.find('\n', pos);
    if (eol == std::string::npos) eol = s.size();
    std::string line = s.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    size_t c = 0;
    while (true) {
      size_t comma = line.find(',', c);
      cells.push_back(line.substr(c, comma == std::string::npos ? std::string::npos : comma - c));
      if (comma == std::string::npos) break;
      c = comma + 1;
    }
    if (first) {
      tab.header = cells;
      first = false;
    } else {
      rvec row;
      for (const std::string& cell : cells) {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw io_error("non-numeric CSV cell '" + cell + "' in " + path);
        }
      }
      tab.rows.push_back(std::move(row));
    }
  }
  return tab;
}

// ---------------------------------------------------------------------------
// configuration: line-oriented key=value, '#' comments, unknown keys are
// hard errors (we track which keys were consumed and complain at the end)

struct ConfigMap {
  std::map<std::string, std::string> kv;
  mutable std::set<std::string> consumed;
  std::string source;

  bool has(const std::string& key) const {
    auto it = kv.find(key);
    if (it == kv.end()) return false;
    consumed.insert(key);
    return true;
  }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    return has(key) ? kv.at(key) : dflt;
  }

  double get_double(const std::string& key, double dflt) const {
    if (!has(key)) return dflt;
    const std::string& v = kv.at(key);
    try {
      size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "': not a number: '" + v + "'");
    }
  }

  long long get_int(const std::string& key, long long dflt) const {
    if (!has(key)) return dflt;
    const std::string& v = kv.at(key);
    try {
      size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw config_error("config key '" + key + "': not an integer: '" + v + "'");
    }
  }

  // call after parsing: every present key must have been consumed
  void reject_unknown() const {
    for (const auto& [k, v] : kv)
      if (!consumed.count(k))
        throw config_error("unknown config key '" + k + "'" +
                           (source.empty() ? "" : " in " + source));
  }
};

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline ConfigMap parse_config_text(const std::string& text, const std::string& source = "") {
  ConfigMap cm;
  cm.source = source;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                         line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error("config line " + std::to_string(lineno) + ": empty key");
    if (cm.kv.count(key))
      throw config_error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cm.kv[key] = val;
    if (pos > text.size()) break;
  }
  return cm;
}

inline ConfigMap load_config(const std::string& path) {
  return parse_config_text(read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// debug export of complex matrices (row-major, "re+imi" cells)

template <class Mat>
inline void write_complex_matrix_csv(const std::string& path, const Mat& A) {
  std::string s;
  for (int r = 0; r < static_cast<int>(A.rows()); ++r) {
    for (int c = 0; c < static_cast<int>(A.cols()); ++c) {
      if (c) s += ",";
      const double im = A(r, c).imag();
      s += g9(A(r, c).real()) + (im < 0 ? "-" : "+") + g9(std::abs(im)) + "i";
    }
    s += "\n";
  }
  write_bytes_atomic(path, s);
}

}  // namespace wbfm::io
