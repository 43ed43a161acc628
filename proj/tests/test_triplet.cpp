#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "oracles.hpp"
#include "recipesnap/triplet.hpp"
#include "test_util.hpp"

using namespace recipesnap;

namespace {

MatrixD rows(std::initializer_list<std::vector<double>> list) {
  MatrixD m;
  for (const auto& r : list) m.append_row(std::span<const double>(r));
  return m;
}

MatrixD random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::normal_distribution<double> normal;
  MatrixD m(r, c);
  for (auto& v : m.data()) v = normal(gen);
  return m;
}

}  // namespace

TEST(TripletLoss, Examples) {
  EXPECT_NEAR(triplet_cos_loss(Embedding{1, 0}, Embedding{1, 0}, Embedding{0, 1}, 0.3), 0.0, 1e-9);
  const Embedding v{0.3, -2, 5};
  EXPECT_NEAR(triplet_cos_loss(v, v, v, 0.3), 0.3, 1e-9);
  EXPECT_NEAR(triplet_cos_loss(Embedding{1, 0}, Embedding{0, 1}, Embedding{1, 0}, 0.3), 1.3, 1e-9);
}

TEST(TripletLoss, ZeroExactlyWhenSeparatedByMargin) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(3), p(3), n(3);
    for (auto* v : {&a, &p, &n})
      for (auto& x : *v) x = normal(gen);
    const double loss = triplet_cos_loss(a, p, n, 0.3);
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 2.3);
    const bool separated = cosine_similarity(a, p) >= cosine_similarity(a, n) + 0.3;
    EXPECT_EQ(loss == 0.0, separated);
  }
}

TEST(Bidirectional, Examples) {
  const auto a = rows({{1, 0}, {0, 1}});
  EXPECT_NEAR(bidirectional_loss(a, a, 0, 1, 0.3), 0.0, 1e-9);

  const auto same = rows({{2, 1}, {2, 1}});
  EXPECT_NEAR(bidirectional_loss(same, same, 0, 1, 0.3), 0.6, 1e-9);

  // forward: 1 - 0.6 + 0.3 = 0.7; backward: 0.8 - 0.6 + 0.3 = 0.5
  const auto aa = rows({{1, 0}, {0, 1}});
  const auto bb = rows({{0.6, 0.8}, {1, 0}});
  EXPECT_NEAR(bidirectional_loss(aa, bb, 0, 1, 0.3), 1.2, 1e-9);
}

TEST(Bidirectional, IndexErrors) {
  const auto a = rows({{1, 0}, {0, 1}});
  try {
    bidirectional_loss(a, a, 0, 2, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IndexOutOfRange);
  }
  try {
    bidirectional_loss(a, a, 1, 1, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SameIndex);
  }
}

TEST(BatchLoss, AlignedOrthonormalIsZero) {
  const auto a = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  TrainConfig cfg;
  EXPECT_EQ(batch_loss(a, a, cfg), 0.0);
}

TEST(BatchLoss, TwoRowsEnumeratedByHand) {
  // pair (0,1): 0.7 + 0.5 = 1.2; pair (1,0): (0.8 - 0 + 0.3) + (1 - 0 + 0.3) = 2.4
  const auto a = rows({{1, 0}, {0, 1}});
  const auto b = rows({{0.6, 0.8}, {1, 0}});
  TrainConfig cfg;
  cfg.negative_strategy = NegativeStrategy::InBatchAll;
  EXPECT_NEAR(batch_loss(a, b, cfg), 1.8, 1e-12);
}

TEST(BatchLoss, TooSmall) {
  const auto a = rows({{1, 0}});
  try {
    batch_loss(a, a, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BatchTooSmall);
  }
}

TEST(BatchLoss, RandomStrategyDeterministic) {
  std::mt19937_64 gen(3);
  const auto a = random_matrix(gen, 9, 4), b = random_matrix(gen, 9, 4);
  TrainConfig cfg;
  cfg.negative_strategy = NegativeStrategy::InBatchRandom;
  cfg.seed = 1234;
  EXPECT_EQ(batch_loss(a, b, cfg), batch_loss(a, b, cfg));
}

TEST(BatchLoss, AllPairsMatchesDoubleLoop) {
  std::mt19937_64 gen(21);
  TrainConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 9, d = 1 + trial % 8;
    const auto a = random_matrix(gen, m, d), b = random_matrix(gen, m, d);
    EXPECT_NEAR(batch_loss(a, b, cfg), oracle::all_pairs_loss(a, b, cfg.margin), 1e-9);
  }
}

TEST(BatchLoss, RowRescalingAndPermutationInvariance) {
  std::mt19937_64 gen(22);
  std::uniform_real_distribution<double> scale(0.05, 20.0);
  TrainConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 7, d = 2 + trial % 5;
    const auto a = random_matrix(gen, m, d), b = random_matrix(gen, m, d);
    const double base = batch_loss(a, b, cfg);

    auto a2 = a, b2 = b;
    for (std::size_t r = 0; r < m; ++r) {
      const double sa = scale(gen), sb = scale(gen);
      for (auto& v : a2.row(r)) v *= sa;
      for (auto& v : b2.row(r)) v *= sb;
    }
    EXPECT_NEAR(batch_loss(a2, b2, cfg), base, 1e-6);

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), gen);
    MatrixD ap(m, d), bp(m, d);
    for (std::size_t r = 0; r < m; ++r) {
      std::copy(a.row(perm[r]).begin(), a.row(perm[r]).end(), ap.row(r).begin());
      std::copy(b.row(perm[r]).begin(), b.row(perm[r]).end(), bp.row(r).begin());
    }
    EXPECT_NEAR(batch_loss(ap, bp, cfg), base, 1e-9);
  }
}

TEST(SampleNegatives, ForcedAndDeterministic) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_negatives(2, 0, rng), 1u);
  Rng r1(77), r2(77);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_negatives(7, 3, r1), sample_negatives(7, 3, r2));
  EXPECT_THROW(sample_negatives(1, 0, rng), Error);
}

TEST(SampleNegatives, UniformOverOtherRows) {
  Rng rng(2718);
  std::map<std::size_t, int> freq;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) ++freq[sample_negatives(5, 2, rng)];
  EXPECT_EQ(freq.count(2), 0u);
  double chi2 = 0;
  for (std::size_t j : {0u, 1u, 3u, 4u}) {
    const double p = freq[j] / static_cast<double>(draws);
    EXPECT_NEAR(p, 0.25, 0.02) << "j=" << j;
    chi2 += (freq[j] - 2500.0) * (freq[j] - 2500.0) / 2500.0;
  }
  EXPECT_LT(chi2, 16.27);  // 3 dof, p = 0.001
}

TEST(Gradient, InactiveHingesGiveZero) {
  EncoderParams p;
  p.weight = rows({{1, 0}, {0, 1}});
  p.bias = {0, 0};
  const auto x = rows({{1, 0}, {0, 1}});
  const auto g = loss_gradient(p, x, x, TrainConfig{});
  for (double v : g.weight.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, SmallCaseMatchesFiniteDifferences) {
  std::mt19937_64 gen(31);
  const auto x = random_matrix(gen, 4, 3), b = random_matrix(gen, 4, 2);
  EncoderParams p;
  p.weight = random_matrix(gen, 3, 2);
  p.bias = {0.1, -0.2};
  Rng rng(0);
  const auto pairs = sample_pairs(4, NegativeStrategy::InBatchAll, rng);
  const auto fd = oracle::central_differences(p, x, b, pairs, 0.3, 1e-5);
  ASSERT_FALSE(fd.straddles_kink);
  const auto g = loss_and_gradient(p, x, b, pairs, 0.3).gradient;
  double worst = 0;
  for (std::size_t q = 0; q < fd.weight.size(); ++q)
    worst = std::max(worst, std::abs(g.weight.data()[q] - fd.weight[q]) /
                                std::max({std::abs(fd.weight[q]), std::abs(g.weight.data()[q]), 1e-6}));
  for (std::size_t q = 0; q < fd.bias.size(); ++q)
    worst = std::max(worst, std::abs(g.bias[q] - fd.bias[q]) / std::max({std::abs(fd.bias[q]), std::abs(g.bias[q]), 1e-6}));
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradient, TargetScaleInvariant) {
  std::mt19937_64 gen(32);
  const auto x = random_matrix(gen, 5, 3);
  auto b = random_matrix(gen, 5, 4);
  const auto p = init_params(3, 4, 9, Activation::Tanh);
  TrainConfig cfg;
  const auto g1 = loss_gradient(p, x, b, cfg);
  for (auto& v : b.data()) v *= 2;
  const auto g2 = loss_gradient(p, x, b, cfg);
  for (std::size_t q = 0; q < g1.weight.data().size(); ++q)
    EXPECT_NEAR(g1.weight.data()[q], g2.weight.data()[q], 1e-6);
  for (std::size_t q = 0; q < g1.bias.size(); ++q) EXPECT_NEAR(g1.bias[q], g2.bias[q], 1e-6);
}

TEST(Gradient, LossMatchesForwardPass) {
  std::mt19937_64 gen(33);
  const auto x = random_matrix(gen, 6, 4), b = random_matrix(gen, 6, 3);
  const auto p = init_params(4, 3, 2);
  Rng rng(4);
  const auto pairs = sample_pairs(6, NegativeStrategy::InBatchRandom, rng);
  EXPECT_NEAR(loss_and_gradient(p, x, b, pairs, 0.3).loss, batch_loss(encode_batch(p, x), b, pairs, 0.3), 1e-12);
}

TEST(Train, ZeroLearningRateKeepsParams) {
  std::mt19937_64 gen(40);
  const auto x = random_matrix(gen, 20, 4), b = random_matrix(gen, 20, 3);
  const auto p = init_params(4, 3, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0;
  cfg.epochs = 3;
  cfg.batch_size = 6;
  for (auto strategy : {NegativeStrategy::InBatchAll, NegativeStrategy::InBatchRandom}) {
    cfg.negative_strategy = strategy;
    const auto r = train(p, x, b, cfg);
    EXPECT_EQ(r.params, p);
    ASSERT_EQ(r.loss_trace.size(), 4u);
    for (double l : r.loss_trace) EXPECT_EQ(l, r.loss_trace.front());
  }
}

TEST(Train, Deterministic) {
  std::mt19937_64 gen(41);
  const auto x = random_matrix(gen, 30, 5), b = random_matrix(gen, 30, 4);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 7;
  cfg.seed = 99;
  cfg.negative_strategy = NegativeStrategy::InBatchRandom;
  const auto r1 = train(init_params(5, 4, 3), x, b, cfg);
  const auto r2 = train(init_params(5, 4, 3), x, b, cfg);
  EXPECT_EQ(r1.loss_trace, r2.loss_trace);
  EXPECT_EQ(r1.params, r2.params);
}

TEST(Train, ReducesLoss) {
  std::mt19937_64 gen(42);
  const auto x = random_matrix(gen, 40, 6);
  const auto b = random_matrix(gen, 40, 6);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 10;
  cfg.learning_rate = 0.5;
  const auto r = train(init_params(6, 6, 3), x, b, cfg);
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(Train, Errors) {
  const auto p = init_params(2, 2, 0);
  TrainConfig cfg;
  try {
    train(p, MatrixD(1, 2, 1.0), MatrixD(1, 2, 1.0), cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BatchTooSmall);
  }
  EXPECT_THROW(train(p, MatrixD(3, 2, 1.0), MatrixD(4, 2, 1.0), cfg), Error);
  cfg.margin = 2.5;
  EXPECT_THROW(train(p, MatrixD(3, 2, 1.0), MatrixD(3, 2, 1.0), cfg), Error);
}

TEST(Train, NonFiniteLossNamesEpoch) {
  std::mt19937_64 gen(43);
  const auto x = random_matrix(gen, 8, 3), b = random_matrix(gen, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e308;  // the first step overflows the weights
  try {
    train(init_params(3, 3, 1), x, b, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(LossTrace, CsvRoundTrip) {
  test_util::TempDir dir;
  const std::vector<double> trace = {0.9, 0.123456789012345678, 1e-300};
  write_loss_trace(dir.path() / "t.csv", trace);
  EXPECT_EQ(read_loss_trace(dir.path() / "t.csv"), trace);
  EXPECT_EQ(test_util::read_text(dir.path() / "t.csv").substr(0, 18), "epoch,mean_loss\n0,");
}
