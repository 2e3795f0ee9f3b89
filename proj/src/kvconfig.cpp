#include "br/kvconfig.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "br/csv.hpp"
#include "br/error.hpp"

namespace br {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
  throw Error("config key '" + key + "': '" + value + "' is not a valid " + type);
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  return parse(read_text_file(path), path.string());
}

std::optional<std::string> KvConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return find(key).value_or(fallback);
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(key, *v, "number");
  return out;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), out);
  if (res.ec != std::errc() || res.ptr != v->data() + v->size()) bad_value(key, *v, "non-negative integer");
  return out;
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  bad_value(key, *v, "boolean");
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::uint64_t KvConfig::hash() const { return fnv1a64(canonical()); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace br
