#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace br {

// INI-flavoured key = value file. "[section]" prefixes following keys with
// "section."; '#' and ';' start comments; surrounding whitespace is trimmed.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KvConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Overlay: keys in `other` win.
  void merge(const KvConfig& other);

  // Sorted "key=value\n" lines; the basis of the config hash.
  std::string canonical() const;
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace br
