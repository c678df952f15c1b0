#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace tunelens::csv {

/// Round-trip decimal rendering ("%.17g"); empty string for NaN.
std::string number(double v);
/// Fixed-point rendering used for labels.
std::string fixed(double v, int digits);
/// Quotes a field when it contains a separator, quote or newline.
std::string field(std::string_view text);
std::string join(const std::vector<std::string>& fields);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split(std::string_view line);
/// Header plus records of a whole stream; '#' lines are collected as comments.
struct Table {
  std::vector<std::string> comments;  // lines starting with '#', without the marker
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ParseError
};
Table read(std::istream& in);
double to_double(const std::string& text);  // "" -> NaN; throws ParseError

}  // namespace tunelens::csv
