#include "nslb/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace nslb {
namespace {

std::string trim(const std::string& s) {
  auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return begin < end ? std::string(begin, end) : std::string();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ConfigError(context + ": expected a number, got '" + text + "'");
  }
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
  Config config;
  config.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::ostringstream here;
    here << origin << ":" << line_no;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(here.str() + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(here.str() + ": empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(here.str() + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(here.str() + ": missing key before '='");
    std::string full = section.empty() ? key : section + "." + key;
    if (config.values_.count(full)) throw ConfigError(here.str() + ": duplicate field " + full);
    config.values_[full] = value;
    config.lines_[full] = line_no;
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  Config config = parse(buffer.str(), path.string());
  config.base_dir_ = path.parent_path();
  return config;
}

std::string Config::where(const std::string& key) const {
  auto it = lines_.find(key);
  std::ostringstream out;
  out << origin_;
  if (it != lines_.end()) out << ":" << it->second;
  out << ": field " << key;
  return out.str();
}

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(origin_ + ": missing required field " + key);
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Config::get_double(const std::string& key) const { return parse_double(get_string(key), where(key)); }

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
  double value = get_double(key);
  if (value != static_cast<double>(static_cast<long>(value)))
    throw ConfigError(where(key) + ": expected an integer, got '" + get_string(key) + "'");
  return static_cast<long>(value);
}

long Config::get_int(const std::string& key, long fallback) const { return has(key) ? get_int(key) : fallback; }

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = get_string(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(where(key) + ": expected true or false, got '" + get_string(key) + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get_string(key))) out.push_back(parse_double(item, where(key)));
  if (out.empty()) throw ConfigError(where(key) + ": expected a comma-separated list of numbers");
  return out;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

std::vector<std::string> Config::get_strings(const std::string& key) const { return split_list(get_string(key)); }

double Config::get_double_in(const std::string& key, double lo, double hi) const {
  double value = get_double(key);
  if (!(value >= lo && value <= hi)) {
    std::ostringstream msg;
    msg << where(key) << ": value " << value << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
  return value;
}

double Config::get_double_in(const std::string& key, double lo, double hi, double fallback) const {
  return has(key) ? get_double_in(key, lo, hi) : fallback;
}

long Config::get_int_in(const std::string& key, long lo, long hi) const {
  long value = get_int(key);
  if (value < lo || value > hi) {
    std::ostringstream msg;
    msg << where(key) << ": value " << value << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }
  return value;
}

long Config::get_int_in(const std::string& key, long lo, long hi, long fallback) const {
  return has(key) ? get_int_in(key, lo, hi) : fallback;
}

std::filesystem::path Config::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir_ / p;
}

}  // namespace nslb
