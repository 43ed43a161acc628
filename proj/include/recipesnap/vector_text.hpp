#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "recipesnap/matrix.hpp"

namespace recipesnap {

/// Whitespace-separated vectors, one per line. A line may start with a
/// non-numeric id token; either every line carries one or none does.
/// Blank lines and lines starting with '#' are skipped.
struct VectorText {
  MatrixD rows;
  std::vector<std::string> ids;  // empty when the file has no ids
};

VectorText read_vector_text(const std::filesystem::path& path);
void write_vector_text(const std::filesystem::path& path, const MatrixD& rows,
                       const std::vector<std::string>& ids = {});

}  // namespace recipesnap
