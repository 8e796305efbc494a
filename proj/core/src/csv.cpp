// SPDX-License-Identifier: Apache-2.0

#include "atlas/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>

namespace atlas::csv {

ParseError::ParseError(std::size_t line, const std::string& message)
    : std::invalid_argument("line " + std::to_string(line) + ": " + message), line_(line) {}

std::string format_double(double value) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(trim(line.substr(start)));
      break;
    }
    out.emplace_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "expected a number, got '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, "non-finite value '" + std::string(field) + "'");
  return value;
}

long long parse_int(std::string_view field, std::size_t line) {
  field = trim(field);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "expected an integer, got '" + std::string(field) + "'");
  }
  return value;
}

std::map<std::string, std::string> parse_header(std::string_view line, std::string_view kind,
                                                std::size_t line_number) {
  line = trim(line);
  if (line.empty() || line.front() != '#') throw ParseError(line_number, "missing '#' header");
  line.remove_prefix(1);
  std::vector<std::string> tokens;
  for (auto& tok : split(line, ' ')) {
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  if (tokens.empty() || tokens.front() != kind) {
    throw ParseError(line_number, "expected a '# " + std::string(kind) + "' header");
  }
  std::map<std::string, std::string> out;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(line_number, "malformed header field '" + tokens[i] + "'");
    }
    out[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return out;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string raw;
  std::size_t line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_number, "expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(line_number, "empty key");
    if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ParseError(line_number, "duplicate key '" + key + "'");
    }
  }
  return out;
}

const std::string& require_key(const std::map<std::string, std::string>& header,
                               const std::string& key, std::size_t line_number) {
  auto it = header.find(key);
  if (it == header.end()) throw ParseError(line_number, "header is missing '" + key + "'");
  return it->second;
}

}  // namespace atlas::csv
