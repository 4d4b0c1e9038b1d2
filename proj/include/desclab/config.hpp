#pragma once

// Key=value experiment configuration.
//
// The on-disk format is a flat text file of `key = value` lines, optionally
// grouped under `[section]` headers; a sectioned key is addressed as
// "section.key".  Blank lines are skipped and everything after a '#' or ';'
// is a comment.  Lookups go through typed getters that supply a default and
// record the effective value, so a report can always emit the complete
// configuration it actually ran with.  Keys that are present in the file but
// never consumed by the running command are an error (typos fail loudly).

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace desclab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in) {
    Config cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto cut = line.find_first_of("#;");
      if (cut != std::string::npos) line.erase(cut);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": unterminated section header");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(lineno) +
                            ": empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected key = value");
      std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": empty key");
      if (!section.empty()) key = section + "." + key;
      if (cfg.values_.count(key))
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  // Command-line override; marks the key as consumed-on-sight so overrides
  // of keys the subcommand never reads still surface as unknown.
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? def : it->second;
    effective_[key] = v;
    return v;
  }

  double get_double(const std::string& key, double def) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    double v = def;
    if (it != values_.end()) {
      std::size_t pos = 0;
      try {
        v = std::stod(it->second, &pos);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" +
                          it->second + "'");
      }
      if (pos != it->second.size())
        throw ConfigError("config key '" + key + "': trailing junk in '" +
                          it->second + "'");
    }
    effective_[key] = format_double(v);
    return v;
  }

  int get_int(const std::string& key, int def) {
    const double v = get_double(key, static_cast<double>(def));
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigError("config key '" + key + "': expected an integer");
    return i;
  }

  bool get_bool(const std::string& key, bool def) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    bool v = def;
    if (it != values_.end()) {
      std::string s = it->second;
      std::transform(s.begin(), s.end(), s.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (s == "true" || s == "1" || s == "yes" || s == "on")
        v = true;
      else if (s == "false" || s == "0" || s == "no" || s == "off")
        v = false;
      else
        throw ConfigError("config key '" + key + "': expected a boolean");
    }
    effective_[key] = v ? "true" : "false";
    return v;
  }

  // Comma-separated list of numbers.
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& def) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    std::vector<double> v;
    if (it == values_.end()) {
      v = def;
    } else {
      std::stringstream ss(it->second);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        try {
          v.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError("config key '" + key +
                            "': expected comma-separated numbers");
        }
      }
    }
    std::string joined;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) joined += ",";
      joined += format_double(v[i]);
    }
    effective_[key] = joined;
    return v;
  }

  // Throws if the source contained keys no getter ever asked for.
  void reject_unknown_keys() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) unknown.push_back(k);
    if (unknown.empty()) return;
    std::string msg = "unknown config key";
    if (unknown.size() > 1) msg += "s";
    msg += ":";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }

  // Every key a getter touched, with the value actually used (defaults
  // included); ordered, for reproducible report emission.
  const std::map<std::string, std::string>& effective() const {
    return effective_;
  }

 private:
  static std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> effective_;
  std::set<std::string> consumed_;
};

}  // namespace desclab
