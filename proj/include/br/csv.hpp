#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace br {

// Shortest decimal that round-trips to the same double ('.' decimal point,
// locale independent).
std::string format_double(double v);

// Fixed notation with `digits` decimals.
std::string format_fixed(double v, int digits);

// Writes text with LF line endings exactly as given.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// RFC 4180 quoting when the cell holds ',', '"' or a line break.
std::string csv_field(const std::string& cell);

// Joins quoted cells with ',' and terminates with '\n'.
std::string csv_line(const std::vector<std::string>& cells);

}  // namespace br
