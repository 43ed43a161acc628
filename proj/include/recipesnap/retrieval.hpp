#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "recipesnap/embedding.hpp"
#include "recipesnap/encoder.hpp"
#include "recipesnap/library.hpp"

namespace recipesnap {

struct Hit {
  std::size_t row = 0;
  std::string id;
  double similarity = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Top matches in non-increasing similarity; equal similarities keep
/// ascending row order.
struct QueryResult {
  std::vector<Hit> ranked;
  std::size_t k = 0;

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

struct ScanOptions {
  std::size_t block_rows = 4096;
  bool parallel = true;
};

/// Exact cosine top-k. The library is split into blocks of
/// `options.block_rows` rows; each block keeps its own top-k and the block
/// results are merged. Blocks run under OpenMP when `options.parallel`.
QueryResult query_topk(const RecipeLibrary& lib, const Embedding& query, std::size_t k,
                       const ScanOptions& options = {});

/// Serial reference: score every row, stable-sort, truncate.
QueryResult query_topk_reference(const RecipeLibrary& lib, const Embedding& query, std::size_t k);

QueryResult query_image_features(const RecipeLibrary& lib, const EncoderParams& params,
                                 std::span<const double> features, std::size_t k, const ScanOptions& options = {});

/// 1-based position of true_id in the full ranking, same tie rule as query_topk.
std::size_t rank_of(const RecipeLibrary& lib, const Embedding& query, const std::string& true_id);

/// Cosine similarity of the query against every library row.
std::vector<double> score_all(const RecipeLibrary& lib, const Embedding& query, bool parallel = true);

/// Similarity of a query against one row, as used by every scan.
double row_similarity(const RecipeLibrary& lib, std::size_t row, std::span<const double> query,
                      double query_norm) noexcept;

}  // namespace recipesnap
