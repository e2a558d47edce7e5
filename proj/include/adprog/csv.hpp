#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adprog::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column index by exact name.
  std::optional<std::size_t> column(std::string_view name) const;
};

/// Comma-separated parser: header row, optional double-quoted fields,
/// blank lines and lines starting with '#' skipped.
Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);
std::string join_line(const std::vector<std::string>& fields);

/// Shortest representation that parses back to the same double.
std::string format_number(double v);
/// Strict full-field parse; std::nullopt on any trailing garbage.
std::optional<double> parse_number(std::string_view s);

}  // namespace adprog::csv
