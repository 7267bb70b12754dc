#pragma once

// Matrix Market (.mtx) reader for real matrices, coordinate or array
// layout. Symmetric storage is expanded to the full dense matrix.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "fpblock/core_linalg.hpp"

namespace fpblock {

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline Error parse_error(long line, const std::string& what) {
  return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline Matrix read_matrix_market(std::istream& in) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw detail::parse_error(1, "empty input");
  ++line_no;

  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket") throw detail::parse_error(line_no, "missing %%MatrixMarket banner");
  object = detail::lowercase(object);
  format = detail::lowercase(format);
  field = detail::lowercase(field);
  symmetry = detail::lowercase(symmetry);
  if (object != "matrix") throw detail::parse_error(line_no, "object '" + object + "' is not 'matrix'");
  if (format != "coordinate" && format != "array") {
    throw detail::parse_error(line_no, "unknown format '" + format + "'");
  }
  if (field == "complex" || field == "pattern") {
    throw Error(ErrorCode::UnsupportedField, "field '" + field + "' is not supported");
  }
  if (field != "real" && field != "integer" && field != "double") {
    throw detail::parse_error(line_no, "unknown field '" + field + "'");
  }
  if (symmetry == "hermitian") {
    throw Error(ErrorCode::UnsupportedField, "hermitian storage is not supported");
  }
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric") {
    throw detail::parse_error(line_no, "unknown symmetry '" + symmetry + "'");
  }
  const bool mirrored = symmetry != "general";
  const double mirror_sign = symmetry == "skew-symmetric" ? -1.0 : 1.0;

  // skip comments and blank lines up to the size line
  do {
    if (!std::getline(in, line)) throw detail::parse_error(line_no + 1, "missing size line");
    ++line_no;
  } while (line.empty() || line[0] == '%' ||
           line.find_first_not_of(" \t\r") == std::string::npos);

  std::istringstream size_line(line);
  long rows = 0, cols = 0, nnz = 0;
  if (format == "coordinate") {
    if (!(size_line >> rows >> cols >> nnz)) throw detail::parse_error(line_no, "bad size line");
  } else {
    if (!(size_line >> rows >> cols)) throw detail::parse_error(line_no, "bad size line");
    nnz = mirrored ? rows * (rows + 1) / 2 : rows * cols;
    if (symmetry == "skew-symmetric") nnz = rows * (rows - 1) / 2;
  }
  if (rows < 1 || cols < 1 || nnz < 0) throw detail::parse_error(line_no, "nonpositive dimensions");
  if (mirrored && rows != cols) throw detail::parse_error(line_no, "symmetric storage needs a square matrix");

  Matrix m = Matrix::Zero(rows, cols);
  long read = 0;
  long array_pos = 0;
  while (read < nnz) {
    if (!std::getline(in, line)) {
      throw detail::parse_error(line_no + 1, "expected " + std::to_string(nnz) + " entries, got " +
                                                 std::to_string(read));
    }
    ++line_no;
    if (line.empty() || line[0] == '%' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream entry(line);
    long i = 0, j = 0;
    double value = 0.0;
    if (format == "coordinate") {
      if (!(entry >> i >> j >> value)) throw detail::parse_error(line_no, "bad coordinate entry");
      if (i < 1 || i > rows || j < 1 || j > cols) throw detail::parse_error(line_no, "index out of range");
    } else {
      if (!(entry >> value)) throw detail::parse_error(line_no, "bad array entry");
      // column-major; symmetric array storage lists the lower triangle
      if (mirrored) {
        const long diag_offset = symmetry == "skew-symmetric" ? 1 : 0;
        long col = 0, pos = array_pos;
        while (pos >= rows - col - diag_offset) {
          pos -= rows - col - diag_offset;
          ++col;
        }
        j = col + 1;
        i = col + diag_offset + pos + 1;
      } else {
        j = array_pos / rows + 1;
        i = array_pos % rows + 1;
      }
      ++array_pos;
    }
    if (!std::isfinite(value)) throw detail::parse_error(line_no, "non-finite value");
    m(i - 1, j - 1) = value;
    if (mirrored && i != j) m(j - 1, i - 1) = mirror_sign * value;
    ++read;
  }
  return m;
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_matrix_market(static_cast<std::istream&>(in));
}

}  // namespace fpblock
