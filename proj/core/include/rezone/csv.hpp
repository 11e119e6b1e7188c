#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rezone/types.hpp"

namespace rezone::csv {

/// In-memory CSV table. Row numbers reported in errors are 1-based file
/// lines (header is line 1).
struct Table {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;          // -1 when absent
  int require_col(const std::string& name) const;  // throws DataError

  const std::string& field(std::size_t row, int col) const;
  int file_line(std::size_t row) const { return static_cast<int>(row) + 2; }

  long long get_int(std::size_t row, int col, const std::string& name) const;
  double get_double(std::size_t row, int col, const std::string& name) const;
  bool get_bool(std::size_t row, int col, const std::string& name) const;
  bool empty_field(std::size_t row, int col) const;
};

Table read_file(const std::string& path);

/// Split one CSV line; handles double-quoted fields with "" escapes.
std::vector<std::string> split_line(const std::string& line);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace rezone::csv
