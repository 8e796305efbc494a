// SPDX-License-Identifier: Apache-2.0

#include <istream>
#include <ostream>
#include <string>

#include "atlas/csv.hpp"
#include "atlas/labels.hpp"

namespace atlas {

namespace {

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    if (!csv::trim(line).empty()) return true;
  }
  return false;
}

}  // namespace

void write_csl_csv(std::ostream& out, const CslTable& table) {
  const std::size_t c = table.num_classes();
  out << "# csl C=" << c << " tau_c=" << csv::format_double(table.tau_c()) << '\n';
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (j > 0) out << ',';
      out << csv::format_double(table.matrix()(i, j));
    }
    out << '\n';
  }
}

CslTable read_csl_csv(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number)) throw csv::ParseError(1, "empty CSL file");
  const auto header = csv::parse_header(line, "csl", line_number);
  const long long c = csv::parse_int(csv::require_key(header, "C", line_number), line_number);
  const double tau_c = csv::parse_double(csv::require_key(header, "tau_c", line_number), line_number);
  if (c < 2) throw csv::ParseError(line_number, "C must be at least 2");

  const auto n = static_cast<std::size_t>(c);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!next_content_line(in, line, line_number)) {
      throw csv::ParseError(line_number + 1, "expected " + std::to_string(n) + " rows");
    }
    const auto fields = csv::split(line);
    if (fields.size() != n) {
      throw csv::ParseError(line_number, "expected " + std::to_string(n) + " values, got " +
                                             std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < n; ++j) m(i, j) = csv::parse_double(fields[j], line_number);
    if (!ProbabilityVector::is_valid(m.row(i))) {
      throw csv::ParseError(line_number, "row is not a probability vector");
    }
  }
  if (next_content_line(in, line, line_number)) {
    throw csv::ParseError(line_number, "unexpected trailing row");
  }
  return CslTable(std::move(m), tau_c);
}

void write_isl_csv(std::ostream& out, const IslTable& table) {
  out << "# isl alpha=" << csv::format_double(table.alpha()) << '\n';
  for (const auto& [id, label] : table.labels()) {
    out << id;
    for (double p : label) out << ',' << csv::format_double(p);
    out << '\n';
  }
}

IslTable read_isl_csv(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number)) throw csv::ParseError(1, "empty ISL file");
  const auto header = csv::parse_header(line, "isl", line_number);
  const double alpha = csv::parse_double(csv::require_key(header, "alpha", line_number), line_number);
  bool force_delta = false;
  if (auto it = header.find("force_delta"); it != header.end()) {
    force_delta = csv::parse_int(it->second, line_number) != 0;
  }

  std::map<std::string, ProbabilityVector> labels;
  std::size_t num_classes = 0;
  while (next_content_line(in, line, line_number)) {
    const auto fields = csv::split(line);
    if (fields.size() < 3) throw csv::ParseError(line_number, "expected sample_id and >= 2 values");
    if (num_classes == 0) num_classes = fields.size() - 1;
    if (fields.size() - 1 != num_classes) {
      throw csv::ParseError(line_number, "expected " + std::to_string(num_classes) + " values");
    }
    Vector p(num_classes);
    for (std::size_t j = 0; j < num_classes; ++j) p[j] = csv::parse_double(fields[j + 1], line_number);
    if (!ProbabilityVector::is_valid(p)) {
      throw csv::ParseError(line_number, "label is not a probability vector");
    }
    if (!labels.emplace(fields[0], ProbabilityVector(std::move(p))).second) {
      throw csv::ParseError(line_number, "duplicate sample id '" + fields[0] + "'");
    }
  }
  return IslTable(std::move(labels), alpha, force_delta);
}

}  // namespace atlas
