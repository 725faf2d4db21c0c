#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cprobe::csv {

/// RFC 4180 table: quoted fields may contain separators, quotes ("") and newlines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based source line where each row starts, for error messages.
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

Table parse(std::string_view content);
Table read(const std::filesystem::path& path);

std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double value);

double parse_double(std::string_view text);
std::optional<double> try_parse_double(std::string_view text);

}  // namespace cprobe::csv
