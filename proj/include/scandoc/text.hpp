#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scandoc {

std::vector<std::string> split_ws(std::string_view s);
std::vector<std::string> split_char(std::string_view s, char sep);
std::string to_lower(std::string_view s);
std::string strip_trailing_punct(std::string_view s);

// Shortest round-trip decimal representation.
std::string format_double(double v);
// Table-1 style: integral values keep one decimal ("26.0"), others round-trip.
std::string format_numeric_value(double v);

// CSV with RFC-style double-quote escaping; no embedded newlines.
std::string csv_escape(std::string_view field);
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::string> csv_split(std::string_view line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace scandoc
