#pragma once

// Minimal RFC 4180 CSV reading and writing plus exact number formatting.
// Doubles are written in shortest round-trip form, so reading a file back
// gives bit-identical values.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace gsurvey {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based physical line on which each row starts (filled by read_csv).
  std::vector<std::size_t> row_lines;

  // Index of column `name`; throws ParseError naming `source` if absent.
  std::size_t column(std::string_view name, const std::string& source) const;
  bool has_column(std::string_view name) const;
  // Source line of row k; for tables built in memory, the line it would
  // occupy when written (header on line 1, no embedded newlines).
  std::size_t line_of(std::size_t k) const { return k < row_lines.size() ? row_lines[k] : k + 2; }
};

void write_csv(std::ostream& out, const CsvTable& table);
// Throws ParseError with a line number on malformed quoting or ragged rows.
CsvTable read_csv(std::istream& in, const std::string& source);

std::string format_double(double value);
std::string format_fixed(double value, int decimals);

// Strict parsers: the whole field must be consumed. Throw ParseError.
double parse_double(std::string_view text, const std::string& source, std::size_t line);
std::int64_t parse_int(std::string_view text, const std::string& source, std::size_t line);
bool parse_bool(std::string_view text, const std::string& source, std::size_t line);

}  // namespace gsurvey
