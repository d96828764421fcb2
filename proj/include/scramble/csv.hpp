#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scramble {

// Minimal CSV interchange: comma separators, '.' decimal point, optional
// single header row auto-detected by a non-numeric first line, values written
// with 17 significant digits so doubles round-trip exactly.

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, int line, int column)
      : std::runtime_error(what), line(line), column(column) {}
  int line;    // 1-based
  int column;  // 1-based
};

struct CsvData {
  Eigen::MatrixXd values;
  std::vector<std::string> header;  // empty when the file had no header row
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* begin = field.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + field.size();
}

}  // namespace detail

inline CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();

  CsvData out;
  if (lines.empty()) {
    out.values.resize(0, 0);
    return out;
  }

  std::size_t first_data = 0;
  const std::vector<std::string> first = detail::split_fields(lines[0]);
  bool numeric_first = true;
  for (const std::string& f : first) {
    double v;
    if (!detail::parse_double(f, v)) {
      numeric_first = false;
      break;
    }
  }
  if (!numeric_first) {
    out.header = first;
    first_data = 1;
  }

  const Eigen::Index p = static_cast<Eigen::Index>(first.size());
  const Eigen::Index n = static_cast<Eigen::Index>(lines.size() - first_data);
  out.values.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int line_no = static_cast<int>(first_data + static_cast<std::size_t>(i)) + 1;
    const std::vector<std::string> fields = detail::split_fields(lines[first_data + static_cast<std::size_t>(i)]);
    if (static_cast<Eigen::Index>(fields.size()) != p)
      throw CsvError("malformed CSV: expected " + std::to_string(p) + " fields, got " +
                         std::to_string(fields.size()) + " at line " + std::to_string(line_no),
                     line_no, static_cast<int>(fields.size()));
    for (Eigen::Index j = 0; j < p; ++j) {
      double v;
      if (!detail::parse_double(fields[static_cast<std::size_t>(j)], v) || !std::isfinite(v))
        throw CsvError("malformed CSV: non-numeric or non-finite value at line " +
                           std::to_string(line_no) + ", column " + std::to_string(j + 1),
                       line_no, static_cast<int>(j + 1));
      out.values(i, j) = v;
    }
  }
  return out;
}

inline void write_csv(const std::string& path, const Eigen::MatrixXd& M,
                      const std::vector<std::string>& header = {}) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != M.cols() && M.size() != 0)
    throw std::invalid_argument("write_csv: header length mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_double(M(i, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// generic string table for mixed-type outputs (flags, method names, logs)
inline void write_table(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw std::invalid_argument("write_table: row width mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace scramble
