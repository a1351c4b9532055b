#include "hrrp/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hrrp {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str(), path);
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text,
                                           const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": empty key");
    }
    if (cfg.kv_.count(key)) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": duplicate key '" + key + "'");
    }
    cfg.kv_[key] = val;
  }
  return cfg;
}

std::string KeyValueConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) {
    throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
  }
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(origin_ + ": key '" + key + "': not a number: " +
                             it->second);
  }
}

int KeyValueConfig::get_int(const std::string& key, int def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(origin_ + ": key '" + key + "': not an integer: " +
                             it->second);
  }
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(origin_ + ": key '" + key +
                             "': not an unsigned integer: " + it->second);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error(origin_ + ": key '" + key + "': not a bool: " +
                           it->second);
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::string raw = get(key);
  size_t start = 0;
  while (start <= raw.size()) {
    const auto comma = raw.find(',', start);
    const std::string item =
        trim(comma == std::string::npos ? raw.substr(start)
                                        : raw.substr(start, comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, std::vector<double> def) const {
  if (!has(key)) return def;
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw std::runtime_error(origin_ + ": key '" + key +
                               "': not a number list entry: " + item);
    }
  }
  return out;
}

}  // namespace hrrp
