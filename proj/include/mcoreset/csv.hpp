#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mcoreset/points.hpp"

namespace mcoreset {

namespace detail {

// Splits one comma-separated line into finite doubles. line_number is
// 1-based over the whole file (header included) for error messages.
inline std::vector<double> parse_csv_row(const std::string& line, long line_number) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(',', pos);
    std::string field = line.substr(pos, next == std::string::npos ? next : next - pos);
    // trim surrounding blanks and a trailing \r
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ' || field.back() == '\t'))
      field.pop_back();
    std::size_t start = field.find_first_not_of(" \t");
    if (start == std::string::npos) field.clear();
    else field = field.substr(start);

    if (field.empty())
      throw DataError("row " + std::to_string(line_number) + ": empty field");
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
      throw DataError("row " + std::to_string(line_number) + ": cannot parse field '" + field + "'");
    if (!std::isfinite(value))
      throw DataError("row " + std::to_string(line_number) + ": non-finite value");
    out.push_back(value);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

struct CsvData {
  PointSet points;
  std::vector<int> labels;  // present iff a label column was requested
  bool has_labels = false;
};

inline CsvData read_csv(std::istream& in, bool has_header,
                        std::optional<int> label_column = std::nullopt) {
  std::string line;
  long line_number = 0;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t arity = 0;

  while (std::getline(in, line)) {
    ++line_number;
    if (has_header && line_number == 1) continue;
    if (line.empty() || line == "\r") continue;
    std::vector<double> fields = detail::parse_csv_row(line, line_number);
    if (rows.empty()) {
      arity = fields.size();
      if (label_column && (*label_column < 0 || *label_column >= static_cast<int>(arity)))
        throw ConfigError("label column " + std::to_string(*label_column) +
                          " out of range for " + std::to_string(arity) + " columns");
      if (label_column && arity < 2)
        throw DataError("need at least one feature column besides the label");
    } else if (fields.size() != arity) {
      throw DataError("row " + std::to_string(line_number) + ": expected " +
                      std::to_string(arity) + " fields, got " + std::to_string(fields.size()));
    }
    if (label_column) {
      double raw = fields[static_cast<std::size_t>(*label_column)];
      double rounded = std::nearbyint(raw);
      if (std::abs(raw - rounded) > 1e-9)
        throw DataError("row " + std::to_string(line_number) + ": label is not an integer");
      labels.push_back(static_cast<int>(rounded));
      fields.erase(fields.begin() + *label_column);
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw DataError("no data rows");

  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.front().size());
  Matrix pts(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) pts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  CsvData out;
  out.points = PointSet(std::move(pts));
  out.labels = std::move(labels);
  out.has_labels = label_column.has_value();
  out.points.validate();
  return out;
}

inline CsvData load_csv(const std::string& path, bool has_header,
                        std::optional<int> label_column = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, has_header, label_column);
}

// Shortest round-trippable decimal form, comma separated, no header.
inline void write_csv(std::ostream& out, const Matrix& pts) {
  char buf[32];
  for (Index i = 0; i < pts.rows(); ++i) {
    for (Index j = 0; j < pts.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", pts(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const Matrix& pts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, pts);
}

}  // namespace mcoreset
