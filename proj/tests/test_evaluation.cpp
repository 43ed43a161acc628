#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "recipesnap/evaluation.hpp"

using namespace recipesnap;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidConfig;
}

RecipeLibrary library_from_rows(const MatrixD& rows, const std::vector<std::string>& ids) {
  RecipeLibrary lib(rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    RecipeRecord r;
    r.id = ids[i];
    r.title = ids[i];
    lib.add_entry(std::move(r), Embedding(rows.row(i)));
  }
  return lib;
}

}  // namespace

TEST(MedianRank, Fixtures) {
  EXPECT_EQ(median_rank({1, 2, 3}), 2.0);
  EXPECT_EQ(median_rank({1, 2, 3, 4}), 2.5);
  EXPECT_EQ(median_rank({7}), 7.0);
  EXPECT_EQ(median_rank({9, 1, 4, 2}), 3.0);
  EXPECT_EQ(code_of([] { median_rank({}); }), Errc::EmptyInput);
}

TEST(RecallAtK, Fixtures) {
  EXPECT_EQ(recall_at_k({1, 6, 11}, 5), 1.0 / 3.0);
  EXPECT_EQ(recall_at_k({1, 1, 1, 1}, 1), 1.0);
  EXPECT_EQ(recall_at_k({2, 3, 10}, 10), 1.0);
  EXPECT_EQ(code_of([] { recall_at_k({}, 1); }), Errc::EmptyInput);
  EXPECT_EQ(code_of([] { recall_at_k({1}, 0); }), Errc::InvalidK);
}

TEST(Metrics, MonotoneAndPermutationInvariant) {
  std::mt19937_64 gen(50);
  std::uniform_int_distribution<std::size_t> len(1, 60), rank(1, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::size_t> ranks(len(gen));
    for (auto& r : ranks) r = rank(gen);
    double prev = 0;
    for (std::size_t k = 1; k <= 201; ++k) {
      const double r = recall_at_k(ranks, k);
      EXPECT_GE(r, prev);
      prev = r;
    }
    auto shuffled = ranks;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    EXPECT_EQ(median_rank(shuffled), median_rank(ranks));
    EXPECT_EQ(recall_at_k(shuffled, 10), recall_at_k(ranks, 10));
    EXPECT_EQ(median_rank(ranks), oracle::median(ranks));
  }
}

TEST(Evaluate, PerfectAlignment) {
  // Identity rows: every query is orthogonal to all rows but its own.
  const std::size_t n = 40;
  MatrixD rows(n, n);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    rows(i, i) = 1;
    ids.push_back("id" + std::to_string(i));
  }
  const auto lib = library_from_rows(rows, ids);
  EvalConfig cfg;
  cfg.pool_size = 10;
  cfg.repetitions = 4;
  const auto report = evaluate(QuerySet{rows, ids}, lib, cfg);
  EXPECT_EQ(report.medr, 1.0);
  EXPECT_EQ(report.recall_at.at(1), 1.0);
  EXPECT_EQ(report.per_repetition_medr.size(), 4u);
}

TEST(Evaluate, OrthogonalQueryRanksSecond) {
  RecipeLibrary lib(2);
  for (auto [id, v] : {std::pair{"true", Embedding{1, 0}}, std::pair{"decoy", Embedding{0, 1}}}) {
    RecipeRecord r;
    r.id = id;
    r.title = id;
    lib.add_entry(r, v);
  }
  MatrixD q(1, 2);
  q(0, 1) = 1;
  EvalConfig cfg;
  cfg.pool_size = 2;
  cfg.repetitions = 3;
  const auto report = evaluate(QuerySet{q, {"true"}}, lib, cfg);
  EXPECT_EQ(report.medr, 2.0);
  EXPECT_EQ(report.recall_at.at(1), 0.0);
  EXPECT_EQ(report.recall_at.at(5), 1.0);
}

TEST(Evaluate, MatchesBruteForceProtocol) {
  std::mt19937_64 gen(51);
  const auto lib = oracle::random_library(gen, 700, 8, false);
  const auto ties = oracle::random_library(gen, 300, 3, true);
  for (const RecipeLibrary* l : {&lib, &ties}) {
    QuerySet qs;
    qs.embeddings = MatrixD(200, l->dim());
    std::uniform_int_distribution<std::size_t> pick(0, l->size() - 1);
    std::normal_distribution<double> noise(0, 0.8);
    for (std::size_t q = 0; q < 200; ++q) {
      const std::size_t row = pick(gen);
      qs.true_ids.push_back(l->id_at(row));
      for (std::size_t d = 0; d < l->dim(); ++d)
        qs.embeddings(q, d) = l->row(row)[d] + (l == &ties ? std::round(noise(gen)) : noise(gen));
      if (std::all_of(qs.embeddings.row(q).begin(), qs.embeddings.row(q).end(), [](double v) { return v == 0; }))
        qs.embeddings(q, 0) = 1;
    }
    EvalConfig cfg;
    cfg.pool_size = l == &ties ? 100 : 250;
    cfg.repetitions = 5;
    cfg.seed = 1234;
    std::vector<std::vector<std::size_t>> ranks;
    const auto report = evaluate(qs, *l, cfg, &ranks);
    EXPECT_EQ(report, oracle::evaluate(qs, *l, cfg));
    for (const auto& rr : ranks)
      for (auto r : rr) {
        EXPECT_GE(r, 1u);
        EXPECT_LE(r, cfg.pool_size);
      }
    EXPECT_EQ(evaluate(qs, *l, cfg), report);
  }
}

TEST(Evaluate, FullPoolOnLibraryRowsIsPerfect) {
  std::mt19937_64 gen(52);
  const auto lib = oracle::random_library(gen, 150, 10, false);
  QuerySet qs;
  qs.embeddings = MatrixD(lib.size(), lib.dim());
  for (std::size_t i = 0; i < lib.size(); ++i) {
    std::copy(lib.row(i).begin(), lib.row(i).end(), qs.embeddings.row(i).begin());
    qs.true_ids.push_back(lib.id_at(i));
  }
  EvalConfig cfg;
  cfg.pool_size = lib.size();
  cfg.repetitions = 2;
  const auto report = evaluate(qs, lib, cfg);
  EXPECT_EQ(report.medr, 1.0);
  EXPECT_EQ(report.recall_at.at(1), 1.0);
}

TEST(Evaluate, Errors) {
  std::mt19937_64 gen(53);
  const auto lib = oracle::random_library(gen, 10, 3, false);
  QuerySet qs{MatrixD(1, 3, 1.0), {"r0"}};
  EvalConfig cfg;
  cfg.pool_size = 11;
  EXPECT_EQ(code_of([&] { evaluate(qs, lib, cfg); }), Errc::PoolTooLarge);
  cfg.pool_size = 5;
  qs.true_ids = {"ghost"};
  EXPECT_EQ(code_of([&] { evaluate(qs, lib, cfg); }), Errc::MissingTrueId);
  qs.true_ids = {"r0"};
  cfg.pool_size = 1;
  EXPECT_EQ(code_of([&] { evaluate(qs, lib, cfg); }), Errc::InvalidConfig);
}

TEST(SamplePool, DistinctAndSeeded) {
  const auto a = sample_pool(50, 20, 7, 0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(a, sample_pool(50, 20, 7, 0));
  EXPECT_NE(a, sample_pool(50, 20, 7, 1));
  EXPECT_EQ(sample_pool(50, 20, 7, 1), sample_pool(50, 20, 8, 0));
  const auto pool = pool_for(a, 1000);
  EXPECT_EQ(pool.back(), 1000u);
  EXPECT_EQ(pool_for(a, a[3]), a);
}

TEST(Synthetic, DeterministicUnitTargets) {
  const auto a = generate_synthetic_pairs(50, 6, 4, 0.1, 3);
  const auto b = generate_synthetic_pairs(50, 6, 4, 0.1, 3);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_EQ(a.ids, b.ids);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(l2_norm(a.targets.row(i)), 1.0, 1e-12);
  EXPECT_NE(generate_synthetic_pairs(50, 6, 4, 0.1, 4).targets, a.targets);
  EXPECT_THROW(generate_synthetic_pairs(5, 0, 4, 0.1, 3), Error);
  EXPECT_THROW(generate_synthetic_pairs(5, 3, 4, -1, 3), Error);
}

TEST(Synthetic, NoiselessFeaturesAreLinearInTargets) {
  // x = G z exactly: any linear relation among targets holds among features.
  const auto s = generate_synthetic_pairs(3, 5, 2, 0.0, 11);
  // z_2 = alpha z_0 + beta z_1 in two dimensions.
  const double z00 = s.targets(0, 0), z01 = s.targets(0, 1), z10 = s.targets(1, 0), z11 = s.targets(1, 1);
  const double det = z00 * z11 - z01 * z10;
  const double alpha = (s.targets(2, 0) * z11 - s.targets(2, 1) * z10) / det;
  const double beta = (z00 * s.targets(2, 1) - z01 * s.targets(2, 0)) / det;
  for (std::size_t f = 0; f < 5; ++f)
    EXPECT_NEAR(s.features(2, f), alpha * s.features(0, f) + beta * s.features(1, f), 1e-9);
}

TEST(Report, JsonRoundTripAndTable) {
  EvalReport r;
  r.medr = 14.15;
  r.recall_at = {{1, 0.4123}, {5, 0.7187}, {10, 0.821}};
  r.per_repetition_medr = {14.0, 14.3};
  r.config.pool_size = 1000;
  r.config.repetitions = 2;
  r.config.seed = 5;
  const auto json = report_to_json(r);
  EXPECT_EQ(report_from_json(json), r);
  EXPECT_EQ(report_to_json(report_from_json(json)), json);
  const auto table = report_to_table(r);
  EXPECT_NE(table.find("MedR"), std::string::npos);
  EXPECT_NE(table.find("Recall@10"), std::string::npos);
  EXPECT_NE(table.find("14.15"), std::string::npos);
  EXPECT_NE(table.find("0.7187"), std::string::npos);
  EXPECT_THROW(report_from_json("{}"), Error);
}
