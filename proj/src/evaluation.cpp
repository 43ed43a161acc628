#include "recipesnap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "recipesnap/retrieval.hpp"
#include "recipesnap/rng.hpp"

namespace recipesnap {

using nlohmann::json;

void EvalConfig::validate() const {
  if (pool_size < 2) throw Error(Errc::InvalidConfig, "pool size must be at least 2");
  if (repetitions < 1) throw Error(Errc::InvalidConfig, "repetitions must be at least 1");
  if (ks.empty()) throw Error(Errc::InvalidConfig, "at least one recall cutoff is required");
  for (auto k : ks)
    if (k < 1) throw Error(Errc::InvalidK, "recall cutoff must be >= 1");
}

double median_rank(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw Error(Errc::EmptyInput, "median of an empty rank list");
  const std::size_t mid = ranks.size() / 2;
  std::nth_element(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(mid), ranks.end());
  const double upper = static_cast<double>(ranks[mid]);
  if (ranks.size() % 2 == 1) return upper;
  const double lower = static_cast<double>(*std::max_element(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(mid)));
  return (lower + upper) / 2.0;
}

double recall_at_k(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) throw Error(Errc::EmptyInput, "recall of an empty rank list");
  if (k < 1) throw Error(Errc::InvalidK, "k must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<std::size_t> sample_pool(std::size_t n, std::size_t pool_size, std::uint64_t seed,
                                     std::size_t repetition) {
  if (pool_size > n)
    throw Error(Errc::PoolTooLarge, "pool of " + std::to_string(pool_size) + " from " + std::to_string(n) + " rows");
  Rng rng(seed + repetition);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t i = 0; i < pool_size; ++i) std::swap(rows[i], rows[i + rng.uniform_index(n - i)]);
  rows.resize(pool_size);
  return rows;
}

std::vector<std::size_t> pool_for(const std::vector<std::size_t>& base_sample, std::size_t true_row) {
  std::vector<std::size_t> pool = base_sample;
  if (!pool.empty() && std::find(pool.begin(), pool.end(), true_row) == pool.end()) pool.back() = true_row;
  return pool;
}

EvalReport evaluate(const QuerySet& queries, const RecipeLibrary& lib, const EvalConfig& cfg) {
  return evaluate(queries, lib, cfg, nullptr);
}

EvalReport evaluate(const QuerySet& queries, const RecipeLibrary& lib, const EvalConfig& cfg,
                    std::vector<std::vector<std::size_t>>* ranks_out) {
  cfg.validate();
  const std::size_t m = queries.embeddings.rows();
  if (m == 0) throw Error(Errc::EmptyInput, "no queries to evaluate");
  if (queries.true_ids.size() != m) throw Error(Errc::DimensionMismatch, "one true id is required per query");
  if (queries.embeddings.cols() != lib.dim())
    throw Error(Errc::DimensionMismatch, "query dim " + std::to_string(queries.embeddings.cols()) +
                                             " differs from library dim " + std::to_string(lib.dim()));
  const std::size_t n = lib.size();
  if (cfg.pool_size > n)
    throw Error(Errc::PoolTooLarge, "pool of " + std::to_string(cfg.pool_size) + " from " + std::to_string(n) + " rows");

  std::vector<std::size_t> true_rows(m);
  std::vector<double> query_norms(m);
  for (std::size_t q = 0; q < m; ++q) {
    const auto row = lib.row_of(queries.true_ids[q]);
    if (!row) throw Error(Errc::MissingTrueId, queries.true_ids[q]);
    true_rows[q] = *row;
    query_norms[q] = kernel::norm(queries.embeddings.row(q).data(), lib.dim());
    if (!std::isfinite(query_norms[q])) throw Error(Errc::NonFinite, "query " + std::to_string(q) + " is not finite");
    if (query_norms[q] == 0.0) throw Error(Errc::ZeroVector, "query " + std::to_string(q) + " is all zeros");
  }

  const std::size_t reps = cfg.repetitions;
  std::vector<std::vector<std::size_t>> bases(reps);
  std::vector<std::vector<char>> in_base(reps, std::vector<char>(n, 0));
  std::vector<char> needed(n, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    bases[r] = sample_pool(n, cfg.pool_size, cfg.seed, r);
    for (auto row : bases[r]) in_base[r][row] = needed[row] = 1;
  }
  std::vector<std::size_t> needed_rows;
  for (std::size_t row = 0; row < n; ++row)
    if (needed[row]) needed_rows.push_back(row);

  std::vector<std::vector<std::size_t>> ranks(reps, std::vector<std::size_t>(m));
  const auto query_count = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
  {
    std::vector<double> sims(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t qi = 0; qi < query_count; ++qi) {
      const auto q = static_cast<std::size_t>(qi);
      const auto query = queries.embeddings.row(q);
      for (auto row : needed_rows) sims[row] = row_similarity(lib, row, query, query_norms[q]);
      const std::size_t t = true_rows[q];
      const double s_t = row_similarity(lib, t, query, query_norms[q]);
      auto beats_true = [&](std::size_t row) { return sims[row] > s_t || (sims[row] == s_t && row < t); };

      for (std::size_t r = 0; r < reps; ++r) {
        const auto& base = bases[r];
        // When the sample missed the true row, its last slot is given to it.
        const std::size_t scanned = in_base[r][t] ? base.size() : base.size() - 1;
        std::size_t ahead = 0;
        for (std::size_t p = 0; p < scanned; ++p)
          if (base[p] != t && beats_true(base[p])) ++ahead;
        ranks[r][q] = ahead + 1;
      }
    }
  }

  EvalReport report;
  report.config = cfg;
  std::vector<std::size_t> all;
  all.reserve(reps * m);
  for (const auto& rr : ranks) {
    report.per_repetition_medr.push_back(median_rank(rr));
    all.insert(all.end(), rr.begin(), rr.end());
  }
  report.medr = std::accumulate(report.per_repetition_medr.begin(), report.per_repetition_medr.end(), 0.0) /
                static_cast<double>(reps);
  for (auto k : cfg.ks) report.recall_at[k] = recall_at_k(all, k);
  if (ranks_out != nullptr) *ranks_out = std::move(ranks);
  return report;
}

SyntheticPairs generate_synthetic_pairs(std::size_t count, std::size_t feature_dim, std::size_t embedding_dim,
                                        double noise_sigma, std::uint64_t seed) {
  if (feature_dim == 0 || embedding_dim == 0) throw Error(Errc::InvalidDimension, "dimensions must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw Error(Errc::InvalidConfig, "noise sigma must be finite and non-negative");

  Rng rng(seed);
  MatrixD mixing(feature_dim, embedding_dim);
  for (double& g : mixing.data()) g = rng.normal();

  SyntheticPairs out;
  out.features = MatrixD(count, feature_dim);
  out.targets = MatrixD(count, embedding_dim);
  out.ids.reserve(count);
  std::vector<double> z(embedding_dim);
  char id[32];
  for (std::size_t i = 0; i < count; ++i) {
    double nz = 0.0;
    while (nz == 0.0) {
      for (double& v : z) v = rng.normal();
      nz = kernel::norm(z.data(), z.size());
    }
    for (std::size_t d = 0; d < embedding_dim; ++d) out.targets(i, d) = z[d] / nz;
    for (std::size_t f = 0; f < feature_dim; ++f) {
      const double clean = kernel::dot(mixing.row(f).data(), out.targets.row(i).data(), embedding_dim);
      out.features(i, f) = clean + noise_sigma * rng.normal();
    }
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    out.ids.emplace_back(id);
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["medr"] = report.medr;
  json recall = json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["per_repetition_medr"] = report.per_repetition_medr;
  j["config"] = {{"pool_size", report.config.pool_size},
                 {"repetitions", report.config.repetitions},
                 {"ks", report.config.ks},
                 {"seed", report.config.seed}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.medr = j.at("medr").get<double>();
    for (const auto& [k, v] : j.at("recall_at").items()) r.recall_at[std::stoull(k)] = v.get<double>();
    r.per_repetition_medr = j.at("per_repetition_medr").get<std::vector<double>>();
    const json& c = j.at("config");
    r.config.pool_size = c.at("pool_size").get<std::size_t>();
    r.config.repetitions = c.at("repetitions").get<std::size_t>();
    r.config.ks = c.at("ks").get<std::vector<std::size_t>>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, std::string("eval report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(Errc::FormatError, std::string("eval report: ") + e.what());
  }
}

std::string report_to_table(const EvalReport& report) {
  std::string header = "  MedR";
  std::string values;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%6.2f", report.medr);
  values = buf;
  for (const auto& [k, v] : report.recall_at) {
    const std::string name = "Recall@" + std::to_string(k);
    const int width = static_cast<int>(std::max<std::size_t>(name.size(), 6));
    std::snprintf(buf, sizeof buf, "  %*s", width, name.c_str());
    header += buf;
    std::snprintf(buf, sizeof buf, "  %*.4f", width, v);
    values += buf;
  }
  return header + "\n" + values + "\n";
}

}  // namespace recipesnap
