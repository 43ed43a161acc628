#include "recipesnap/retrieval.hpp"

#include <algorithm>
#include <numeric>

namespace recipesnap {

namespace {

struct Candidate {
  double similarity;
  std::size_t row;
};

// Total order: higher similarity first, then lower row index.
bool ranks_before(const Candidate& x, const Candidate& y) noexcept {
  if (x.similarity != y.similarity) return x.similarity > y.similarity;
  return x.row < y.row;
}

double checked_query_norm(const RecipeLibrary& lib, const Embedding& query) {
  if (lib.empty()) throw Error(Errc::EmptyLibrary, "library has no rows");
  if (query.dim() != lib.dim())
    throw Error(Errc::DimensionMismatch, "query has dim " + std::to_string(query.dim()) + ", library dim is " +
                                             std::to_string(lib.dim()));
  const double qn = l2_norm(query.values());
  if (qn == 0.0) throw Error(Errc::ZeroVector, "query embedding is all zeros");
  return qn;
}

QueryResult to_result(const RecipeLibrary& lib, const std::vector<Candidate>& top, std::size_t k) {
  QueryResult out;
  out.k = k;
  out.ranked.reserve(top.size());
  for (const auto& c : top) out.ranked.push_back({c.row, lib.id_at(c.row), c.similarity});
  return out;
}

}  // namespace

double row_similarity(const RecipeLibrary& lib, std::size_t row, std::span<const double> query,
                      double query_norm) noexcept {
  return kernel::cosine_from(kernel::dot(lib.row(row).data(), query.data(), lib.dim()), lib.row_norms()[row],
                             query_norm);
}

QueryResult query_topk(const RecipeLibrary& lib, const Embedding& query, std::size_t k, const ScanOptions& options) {
  if (k < 1) throw Error(Errc::InvalidK, "k must be >= 1");
  const double qn = checked_query_norm(lib, query);
  const std::size_t n = lib.size();
  const std::size_t keep = std::min(k, n);
  const std::size_t block = std::max<std::size_t>(options.block_rows, 1);
  const std::size_t blocks = (n + block - 1) / block;

  // Each block writes only its own slot, so completion order is irrelevant.
  std::vector<std::vector<Candidate>> partial(blocks);
  const auto block_count = static_cast<std::ptrdiff_t>(blocks);
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel && blocks > 1)
  for (std::ptrdiff_t bi = 0; bi < block_count; ++bi) {
    const std::size_t begin = static_cast<std::size_t>(bi) * block;
    const std::size_t end = std::min(begin + block, n);
    std::vector<Candidate> local(end - begin);
    for (std::size_t r = begin; r < end; ++r) local[r - begin] = {row_similarity(lib, r, query.values(), qn), r};
    const std::size_t local_keep = std::min(keep, local.size());
    std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(local_keep), local.end(),
                      ranks_before);
    local.resize(local_keep);
    partial[static_cast<std::size_t>(bi)] = std::move(local);
  }

  std::vector<Candidate> merged;
  merged.reserve(blocks * keep);
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end(), ranks_before);
  merged.resize(keep);
  return to_result(lib, merged, k);
}

QueryResult query_topk_reference(const RecipeLibrary& lib, const Embedding& query, std::size_t k) {
  if (k < 1) throw Error(Errc::InvalidK, "k must be >= 1");
  const double qn = checked_query_norm(lib, query);
  std::vector<Candidate> all(lib.size());
  for (std::size_t r = 0; r < lib.size(); ++r) all[r] = {row_similarity(lib, r, query.values(), qn), r};
  std::stable_sort(all.begin(), all.end(),
                   [](const Candidate& x, const Candidate& y) { return x.similarity > y.similarity; });
  all.resize(std::min(k, all.size()));
  return to_result(lib, all, k);
}

QueryResult query_image_features(const RecipeLibrary& lib, const EncoderParams& params,
                                 std::span<const double> features, std::size_t k, const ScanOptions& options) {
  return query_topk(lib, encode(params, features), k, options);
}

std::vector<double> score_all(const RecipeLibrary& lib, const Embedding& query, bool parallel) {
  const double qn = checked_query_norm(lib, query);
  std::vector<double> out(lib.size());
  const auto n = static_cast<std::ptrdiff_t>(lib.size());
#pragma omp parallel for schedule(static) if (parallel && n > 4096)
  for (std::ptrdiff_t r = 0; r < n; ++r)
    out[static_cast<std::size_t>(r)] = row_similarity(lib, static_cast<std::size_t>(r), query.values(), qn);
  return out;
}

std::size_t rank_of(const RecipeLibrary& lib, const Embedding& query, const std::string& true_id) {
  const auto true_row = lib.row_of(true_id);
  if (!true_row) throw Error(Errc::NotFound, true_id);
  const double qn = checked_query_norm(lib, query);
  const Candidate target{row_similarity(lib, *true_row, query.values(), qn), *true_row};
  const auto n = static_cast<std::ptrdiff_t>(lib.size());
  std::size_t ahead = 0;
#pragma omp parallel for schedule(static) reduction(+ : ahead) if (n > 4096)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    if (ranks_before({row_similarity(lib, row, query.values(), qn), row}, target)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace recipesnap
