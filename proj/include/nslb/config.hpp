#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nslb {

// Parse or validation failure; the message names the line or the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" text with "[section]" headers and '#' comments. Keys are
// addressed as "section.key"; keys before the first header have no prefix.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  // Range-checked accessors; the error names the field and the allowed range.
  double get_double_in(const std::string& key, double lo, double hi) const;
  double get_double_in(const std::string& key, double lo, double hi, double fallback) const;
  long get_int_in(const std::string& key, long lo, long hi) const;
  long get_int_in(const std::string& key, long lo, long hi, long fallback) const;

  // Resolves a path relative to the directory of the config file.
  std::filesystem::path resolve(const std::string& relative) const;

 private:
  std::string origin_;
  std::filesystem::path base_dir_;
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;

  std::string where(const std::string& key) const;
};

}  // namespace nslb
