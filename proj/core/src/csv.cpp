#include "rezone/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rezone::csv {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  Table t;
  t.path = path;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      t.header = split_line(line);
      first = false;
      continue;
    }
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw DataError(path, static_cast<int>(t.rows.size()) + 2, "",
                      "expected " + std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (first) throw DataError("empty file (missing header): " + path);
  return t;
}

int Table::col(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

int Table::require_col(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw DataError(path, 1, name, "missing required column");
  return c;
}

const std::string& Table::field(std::size_t row, int col) const {
  return rows[row][static_cast<std::size_t>(col)];
}

bool Table::empty_field(std::size_t row, int col) const {
  return field(row, col).empty();
}

long long Table::get_int(std::size_t row, int col, const std::string& name) const {
  const std::string& s = field(row, col);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw DataError(path, file_line(row), name, "not an integer: '" + s + "'");
  return v;
}

double Table::get_double(std::size_t row, int col, const std::string& name) const {
  const std::string& s = field(row, col);
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(path, file_line(row), name, "not a number: '" + s + "'");
  }
}

bool Table::get_bool(std::size_t row, int col, const std::string& name) const {
  const std::string& s = field(row, col);
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw DataError(path, file_line(row), name, "not a boolean (0/1/true/false): '" + s + "'");
}

std::string format_double(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  auto write_row = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      const std::string& f = fields[i];
      if (f.find_first_of(",\"\n") != std::string::npos) {
        out << '"';
        for (char c : f) {
          if (c == '"') out << "\"\"";
          else out << c;
        }
        out << '"';
      } else {
        out << f;
      }
    }
    out << '\n';
  };
  write_row(header);
  for (const auto& r : rows) write_row(r);
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace rezone::csv
