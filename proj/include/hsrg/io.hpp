// Configuration, CSV/JSON emission, checksums and flow snapshots.
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hsrg/numerics.hpp"

namespace hsrg {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kEnvPrefix = "HSRG_";

/// Shortest round-trip decimal form; locale independent.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------- config

/// INI configuration with sections [physical], [numerical], [task], [output].
/// Environment variables HSRG_<SECTION>_<KEY> override file entries.
class RunConfig {
 public:
  static RunConfig from_string(const std::string& text, bool apply_env = true) {
    RunConfig c;
    c.text_ = text;
    std::istringstream is(text);
    try {
      boost::property_tree::ini_parser::read_ini(is, c.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (apply_env) c.apply_env();
    c.validate();
    return c;
  }
  static RunConfig from_file(const std::string& path, bool apply_env = true) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str(), apply_env);
  }

  template <class T>
  T get(const std::string& key, T def) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return def;
    return convert<T>(key, *v);
  }
  template <class T>
  T require(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) throw ConfigError("missing config key " + key);
    return convert<T>(key, *v);
  }
  [[nodiscard]] bool has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

  /// Comma-separated list of numbers; an empty value is an empty list.
  [[nodiscard]] std::vector<double> list(const std::string& key, std::vector<double> def = {}) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) return def;
    std::vector<double> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      out.push_back(convert<double>(key, item.substr(b, e - b + 1)));
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    tree_.put(key, value);
    overrides_[key] = value;
  }

  /// Verbatim file text followed by the applied overrides.
  [[nodiscard]] std::string echo() const {
    std::string s = text_;
    for (const auto& [k, v] : overrides_) s += "# override " + k + " = " + v + "\n";
    return s;
  }
  [[nodiscard]] const std::map<std::string, std::string>& overrides() const { return overrides_; }

 private:
  template <class T>
  static T convert(const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
      throw ConfigError("config key " + key + " is not a boolean: " + v);
    } else {
      T out{};
      const char* b = v.data();
      const char* e = b + v.size();
      const auto r = std::from_chars(b, e, out);
      if (r.ec != std::errc() || r.ptr != e) throw ConfigError("config key " + key + " is not a number: " + v);
      return out;
    }
  }

  /// HSRG_PHYSICAL_M=2 sets physical.m; the section is the first token, the key the rest, both lowercased.
  void apply_env() {
    std::map<std::string, std::string> found;
    for (char** e = environ; e && *e; ++e) {
      const std::string kv = *e;
      if (kv.rfind(kEnvPrefix, 0) != 0) continue;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) continue;
      std::string name = kv.substr(std::strlen(kEnvPrefix), eq - std::strlen(kEnvPrefix));
      for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      const auto us = name.find('_');
      if (us == std::string::npos || us == 0 || us + 1 == name.size()) continue;
      const std::string sec = name.substr(0, us);
      if (sec != "physical" && sec != "numerical" && sec != "task" && sec != "output") continue;
      found[sec + "." + name.substr(us + 1)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : found) set(k, v);
  }

  void validate() const {
    for (const char* k : {"physical.m", "numerical.lambda0", "numerical.grid_ratio", "numerical.zmax",
                          "numerical.steps_per_unit", "numerical.relevant_steps_per_unit",
                          "numerical.tolerance"}) {
      if (has(k) && !(get<double>(k, 1.0) > 0.0)) throw ConfigError(std::string(k) + " must be > 0");
    }
    if (has("physical.c") && !(get<double>("physical.c", 0.0) >= 0.0)) throw ConfigError("physical.c must be >= 0");
    const std::string bc = get<std::string>("physical.bc", "robin");
    if (bc != "dirichlet" && bc != "neumann" && bc != "robin") throw ConfigError("physical.bc must be dirichlet, neumann or robin");
    const double d = get<double>("numerical.delta", 0.1);
    if (!(d > 0.0 && d < 1.0)) throw ConfigError("numerical.delta must lie in (0, 1)");
  }

  std::string text_;
  boost::property_tree::ptree tree_;
  std::map<std::string, std::string> overrides_;
};

// ---------------------------------------------------------------- CSV / JSON

class CsvTable {
 public:
  CsvTable(std::string schema, std::vector<std::string> columns) : schema_(std::move(schema)), cols_(std::move(columns)) {}
  void row(const std::vector<double>& values) {
    if (values.size() != cols_.size()) throw ShapeError("CSV row has the wrong number of columns");
    rows_.push_back(values);
  }
  [[nodiscard]] std::string str() const {
    std::string s = "#schema=" + schema_ + "\n";
    for (std::size_t i = 0; i < cols_.size(); ++i) s += (i ? "," : "") + cols_[i];
    s += "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + fmt_double(r[i]);
      s += "\n";
    }
    return s;
  }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const { return rows_; }
  [[nodiscard]] const std::vector<std::string>& columns() const { return cols_; }

 private:
  std::string schema_;
  std::vector<std::string> cols_;
  std::vector<std::vector<double>> rows_;
};

/// Parses a table written by CsvTable::str; returns the schema and the table.
inline CsvTable parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("#schema=", 0) != 0) throw ConfigError("CSV lacks a schema line");
  const std::string schema = line.substr(8);
  if (!std::getline(is, line)) throw ConfigError("CSV lacks a header line");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  CsvTable t(schema, cols);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc()) throw ConfigError("bad CSV number: " + c);
      r.push_back(v);
    }
    t.row(r);
  }
  return t;
}

using Json = nlohmann::ordered_json;

/// Non-finite values become strings; JSON has no literal for them.
inline Json jnum(double v) {
  if (!std::isfinite(v)) return Json(fmt_double(v));
  return Json(v);
}
inline Json jarray(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << content;
  if (!f) throw ConfigError("write failed for " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Collects written files and their checksums for the manifest.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    sums_[name] = hex64(fnv1a(content));
  }
  [[nodiscard]] const std::map<std::string, std::string>& checksums() const { return sums_; }
  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> sums_;
};

// ---------------------------------------------------------------- snapshots

/// Named arrays of doubles plus a JSON header, in a versioned binary container:
/// "HSRGSNAP" | u32 version | u64 header length | header | per array: u64 name
/// length, name, u64 count, count little-endian doubles | u64 FNV-1a of all preceding bytes.
struct Snapshot {
  static constexpr std::uint32_t kFormatVersion = 1;
  Json header = Json::object();
  std::map<std::string, std::vector<double>> arrays;

  [[nodiscard]] std::string serialize() const {
    std::string out = "HSRGSNAP";
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    auto put64 = [&](std::uint64_t v) {
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
      put(b, 8);
    };
    const std::uint32_t ver = kFormatVersion;
    unsigned char vb[4];
    for (int i = 0; i < 4; ++i) vb[i] = static_cast<unsigned char>(ver >> (8 * i));
    put(vb, 4);
    const std::string h = header.dump();
    put64(h.size());
    out += h;
    for (const auto& [name, vals] : arrays) {
      put64(name.size());
      out += name;
      put64(vals.size());
      for (double v : vals) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put64(bits);
      }
    }
    put64(fnv1a(out));
    return out;
  }

  static Snapshot deserialize(const std::string& data) {
    if (data.size() < 8 + 4 + 8 + 8 || data.compare(0, 8, "HSRGSNAP") != 0) throw ConfigError("not a snapshot file");
    std::size_t pos = 8;
    auto get64 = [&]() {
      if (pos + 8 > data.size()) throw ConfigError("truncated snapshot");
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
      pos += 8;
      return v;
    };
    std::uint32_t ver = 0;
    for (int i = 0; i < 4; ++i) ver |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 4;
    if (ver != kFormatVersion) throw ConfigError("unsupported snapshot version " + std::to_string(ver));
    const std::string body = data.substr(0, data.size() - 8);
    {
      std::size_t save = pos;
      pos = data.size() - 8;
      if (get64() != fnv1a(body)) throw ConfigError("snapshot checksum mismatch");
      pos = save;
    }
    Snapshot s;
    const std::uint64_t hl = get64();
    if (pos + hl > body.size()) throw ConfigError("truncated snapshot header");
    s.header = Json::parse(data.substr(pos, hl));
    pos += hl;
    while (pos < body.size()) {
      const std::uint64_t nl = get64();
      if (pos + nl > body.size()) throw ConfigError("truncated snapshot array name");
      std::string name = data.substr(pos, nl);
      pos += nl;
      const std::uint64_t cnt = get64();
      if (cnt > (body.size() - pos) / 8) throw ConfigError("truncated snapshot array");
      std::vector<double> vals(cnt);
      for (auto& v : vals) {
        const std::uint64_t bits = get64();
        std::memcpy(&v, &bits, 8);
      }
      s.arrays.emplace(std::move(name), std::move(vals));
    }
    return s;
  }
};

}  // namespace hsrg
