#include "recipesnap/vector_text.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace recipesnap {

namespace {

bool parse_double(const std::string& token, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(token.c_str(), &end);
  return end != token.c_str() && *end == '\0' && errno != ERANGE && std::isfinite(out);
}

}  // namespace

VectorText read_vector_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  VectorText out;
  std::vector<double> values;
  std::size_t width = 0;
  std::size_t rows = 0;
  int has_ids = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream tokens(line);
    std::string token;
    std::vector<std::string> parts;
    while (tokens >> token) parts.push_back(token);
    if (parts.empty() || parts[0][0] == '#') continue;

    const std::string where = path.string() + ":" + std::to_string(lineno);
    double probe;
    const int line_has_id = parse_double(parts[0], probe) ? 0 : 1;
    if (has_ids == -1) has_ids = line_has_id;
    if (line_has_id != has_ids) throw Error(Errc::FormatError, where + ": ids must be on every line or on none");
    if (line_has_id) out.ids.push_back(parts[0]);

    const std::size_t first = static_cast<std::size_t>(line_has_id);
    const std::size_t count = parts.size() - first;
    if (count == 0) throw Error(Errc::FormatError, where + ": no values after id");
    if (rows == 0) width = count;
    if (count != width)
      throw Error(Errc::DimensionMismatch,
                  where + ": expected " + std::to_string(width) + " values, found " + std::to_string(count));
    for (std::size_t p = first; p < parts.size(); ++p) {
      double v;
      if (!parse_double(parts[p], v)) throw Error(Errc::FormatError, where + ": bad number '" + parts[p] + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  out.rows = MatrixD(rows, width, std::move(values));
  return out;
}

void write_vector_text(const std::filesystem::path& path, const MatrixD& rows, const std::vector<std::string>& ids) {
  if (!ids.empty() && ids.size() != rows.rows())
    throw Error(Errc::DimensionMismatch, "one id per row is required");
  std::string text;
  char buf[40];
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    if (!ids.empty()) text += ids[r];
    for (std::size_t c = 0; c < rows.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", rows(r, c));
      if (!ids.empty() || c > 0) text += ' ';
      text += buf;
    }
    text += '\n';
  }
  binary::write_file(path, text);
}

}  // namespace recipesnap
