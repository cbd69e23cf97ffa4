#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcpeval::detail {

std::string trim(std::string_view s);
std::string lower(std::string_view s);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view text);

// Comma split with optional double-quoted fields ("" escapes a quote).
std::vector<std::string> split_csv_row(std::string_view line);

std::optional<double> parse_double(std::string_view s);
std::optional<unsigned long long> parse_uint(std::string_view s);

// 17 significant digits: enough to round-trip any double.
std::string format_double(double v);

// Shortest %g rendering that parses back to the same double.
std::string format_shortest(double v);

// Fixed-point rendering for human-facing tables.
std::string format_fixed(double v, int decimals);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mcpeval::detail
