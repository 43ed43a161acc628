#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "recipesnap/library.hpp"
#include "recipesnap/matrix.hpp"

namespace recipesnap {

struct EvalConfig {
  std::size_t pool_size = 1000;
  std::size_t repetitions = 10;
  std::vector<std::size_t> ks = {1, 5, 10};
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct EvalReport {
  double medr = 0.0;
  std::map<std::size_t, double> recall_at;
  std::vector<double> per_repetition_medr;
  EvalConfig config;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Median of 1-based ranks; the mean of the central pair for even counts.
double median_rank(std::vector<std::size_t> ranks);

/// Fraction of ranks <= k.
double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k);

/// Query embeddings (one per row) with the library id of each true match.
struct QuerySet {
  MatrixD embeddings;
  std::vector<std::string> true_ids;
};

/// The rows of the pool used for one repetition when the query's true match
/// sits at `true_row`: the repetition's base sample, with its last slot
/// swapped for `true_row` if the sample missed it.
std::vector<std::size_t> pool_for(const std::vector<std::size_t>& base_sample, std::size_t true_row);

/// Base sample of one repetition: `pool_size` distinct rows out of `n`, drawn
/// by a partial Fisher-Yates shuffle seeded with seed + repetition.
std::vector<std::size_t> sample_pool(std::size_t n, std::size_t pool_size, std::uint64_t seed,
                                     std::size_t repetition);

/// Ranks every query against its pool for each repetition. Reports the mean
/// of the per-repetition MedRs and Recall@K pooled over all observations.
EvalReport evaluate(const QuerySet& queries, const RecipeLibrary& lib, const EvalConfig& cfg);

/// Also hands back every (repetition, query) rank, repetition-major.
EvalReport evaluate(const QuerySet& queries, const RecipeLibrary& lib, const EvalConfig& cfg,
                    std::vector<std::vector<std::size_t>>* ranks_out);

struct SyntheticPairs {
  MatrixD features;  // count x F
  MatrixD targets;   // count x D, unit rows
  std::vector<std::string> ids;
};

/// Latent unit vectors z_i become the targets; features are G z_i + noise with
/// G a seeded F x D Gaussian matrix.
SyntheticPairs generate_synthetic_pairs(std::size_t count, std::size_t feature_dim, std::size_t embedding_dim,
                                        double noise_sigma, std::uint64_t seed);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Aligned table: MedR, Recall@K columns.
std::string report_to_table(const EvalReport& report);

}  // namespace recipesnap
