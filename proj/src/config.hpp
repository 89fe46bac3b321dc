#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "util.hpp"

namespace ebert {

/// Flat `key = value` configuration with '#' comments. Unknown keys are an
/// error; flags override file values.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);
  /// Each override is `key=value`; applied after the file, so flags win.
  void apply_overrides(const std::vector<std::string>& overrides);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  uint64_t get_seed(const std::string& key, uint64_t fallback) const;

  static const std::set<std::string>& known_keys();

 private:
  void set_checked(const std::string& key, const std::string& value, const std::string& where);
  std::map<std::string, std::string> values_;
};

}  // namespace ebert
