#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcfair::csv {

// RFC-4180 table: header row plus string cells. Quoted fields may contain
// separators, doubled quotes, and line breaks.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column(std::string_view name) const;  // throws SchemaError
};

Table parse(std::string_view text);
Table read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

// Strict numeric parse of a whole (trimmed) cell; nullopt on empty or junk.
std::optional<double> parse_number(std::string_view cell);

}  // namespace dcfair::csv
