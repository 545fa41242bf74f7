#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deepforest::text {

// Splits on a single-character delimiter; keeps empty fields.
std::vector<std::string_view> split(std::string_view line, char delim = ',');

std::string_view trim(std::string_view s);

// Strict parse of a whole field. Empty (after trimming) returns nullopt;
// anything that is not a complete number throws DataError naming `what`.
std::optional<double> parse_optional_double(std::string_view field, std::string_view what);
double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Hex-float representation ("%a"); bit-exact and locale independent.
std::string format_hex(double value);
double parse_hex(std::string_view field);

// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

}  // namespace deepforest::text
