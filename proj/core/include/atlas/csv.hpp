// SPDX-License-Identifier: Apache-2.0
//
// Small helpers for the line-oriented CSV formats used throughout.

#ifndef ATLAS_CSV_HPP
#define ATLAS_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace atlas::csv {

/// Raised on malformed input; carries the 1-based line number.
class ParseError : public std::invalid_argument {
 public:
  ParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double value);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

double parse_double(std::string_view field, std::size_t line);
long long parse_int(std::string_view field, std::size_t line);

/// Parses "# <kind> key=value key=value". Throws ParseError if the kind differs.
std::map<std::string, std::string> parse_header(std::string_view line, std::string_view kind,
                                                std::size_t line_number);

/// "key = value" lines; blank lines and lines starting with '#' are skipped.
/// Duplicate keys and lines without '=' are errors.
std::map<std::string, std::string> parse_key_values(std::istream& in);

const std::string& require_key(const std::map<std::string, std::string>& header,
                               const std::string& key, std::size_t line_number);

}  // namespace atlas::csv

#endif  // ATLAS_CSV_HPP
