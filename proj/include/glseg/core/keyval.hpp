#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glseg {

// key=value text files ('#' starts a comment, blank lines ignored).
// Order is preserved so hashes over the content are stable.
class KeyVal {
 public:
  static KeyVal from_file(const std::string& path);
  static KeyVal from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  // Canonical serialization: entries sorted by key, one per line.
  std::string canonical() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::vector<std::string> split_list(const std::string& text, char sep = ',');
std::string trim(const std::string& s);

}  // namespace glseg
