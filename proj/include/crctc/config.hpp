#pragma once

// Flat `key = value` configuration text. '#' starts a comment; blank lines
// are ignored; later assignments override earlier ones.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "crctc/lattice.hpp"

namespace crctc {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is);
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  // "key=value" as given on a command line.
  void set_assignment(const std::string& assignment);
  void merge(const KeyValueConfig& overrides);

  bool has(const std::string& key) const;
  const std::string& raw(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string to_text() const;

  // Keys present here but absent from `known`.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace crctc
