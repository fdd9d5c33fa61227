#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfrec/common.hpp"

namespace cfrec {

/// `key = value` text files; '#' starts a comment, blank lines ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::string& path);
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma separated

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace cfrec
