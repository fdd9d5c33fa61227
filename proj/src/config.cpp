#include "cfrec/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace cfrec {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error::usage(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw Error::usage(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return std::stod(*v);
  } catch (const std::exception&) {
    throw Error::usage(origin_ + ": key '" + key + "' expects a number, got '" + *v + "'");
  }
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    long long parsed = std::stoll(*v);
    if (parsed < 0) throw std::out_of_range("negative");
    return static_cast<std::size_t>(parsed);
  } catch (const std::exception&) {
    throw Error::usage(origin_ + ": key '" + key + "' expects a non-negative integer, got '" +
                       *v + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw Error::usage(origin_ + ": key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  auto v = get(key);
  std::vector<double> out;
  if (!v) return out;
  std::stringstream ss(*v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error::usage(origin_ + ": key '" + key + "' expects comma-separated numbers");
    }
  }
  return out;
}

}  // namespace cfrec
