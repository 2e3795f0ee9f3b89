#include "br/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <system_error>

#include "br/error.hpp"

namespace br {

std::string format_double(double v) {
  char buf[64];
  // Whole numbers below 2^53 print as plain integers (parameter and FLOP counts).
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 0x1.0p53) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(v));
    return std::string(buf, res.ptr);
  }
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int digits) {
  char buf[128];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  if (res.ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string csv_field(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ',';
    out += csv_field(cells[i]);
  }
  out += '\n';
  return out;
}

}  // namespace br
