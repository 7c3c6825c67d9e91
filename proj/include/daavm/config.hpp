#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "daavm/rng.hpp"

namespace daavm {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value configuration parsed from a TOML-style file: "[section]"
// headers, "key = value" lines, '#' comments. Keys flatten to "section.key".
// Environment variables DAAVM_SECTION_KEY override file values.
struct Config {
  std::map<std::string, std::string> values;

  static std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
        val = val.substr(1, val.size() - 2);
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      cfg.values[key] = val;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    Config cfg = parse(f);
    cfg.apply_env_overrides();
    return cfg;
  }

  // DAAVM_POTTS_THETA overrides "potts.theta".
  void apply_env_overrides() {
    for (auto& [key, val] : values) {
      std::string env = "DAAVM_";
      for (char c : key)
        env += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (const char* v = std::getenv(env.c_str())) val = v;
    }
  }

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get_str(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }
  std::string get_str(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(key, get_str(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int(const std::string& key) const { return to_int(key, get_str(key)); }
  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + v);
  }

  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    std::string raw = get_str(key);
    if (raw.size() >= 2 && raw.front() == '[' && raw.back() == ']')
      raw = raw.substr(1, raw.size() - 2);
    std::istringstream ss(raw);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(to_double(key, trim(tok)));
    return out;
  }

  // Content hash over the sorted flattened pairs (std::map is sorted).
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
      }
      h ^= 0x1f;
      h *= 0x100000001b3ull;
    };
    for (const auto& [k, v] : values) {
      mix(k);
      mix(v);
    }
    return h;
  }

 private:
  static double to_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not a number: " + v);
    }
  }
  static long long to_int(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " is not an integer: " + v);
    }
  }
};

}  // namespace daavm
