#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "recipesnap/embedding.hpp"
#include "recipesnap/encoder.hpp"
#include "recipesnap/matrix.hpp"
#include "recipesnap/rng.hpp"

namespace recipesnap {

enum class NegativeStrategy { InBatchRandom, InBatchAll };

struct TrainConfig {
  double margin = 0.3;
  double learning_rate = 0.1;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  NegativeStrategy negative_strategy = NegativeStrategy::InBatchAll;

  /// InvalidConfig unless 0 <= margin <= 2, learning_rate >= 0 and finite,
  /// batch_size >= 2.
  void validate() const;
};

/// An ordered (positive row i, negative row j) pair, i != j.
using PairIndex = std::pair<std::size_t, std::size_t>;

/// max(0, cos(a, n) - cos(a, p) + margin)
double triplet_cos_loss(std::span<const double> anchor, std::span<const double> positive,
                        std::span<const double> negative, double margin);
double triplet_cos_loss(const Embedding& anchor, const Embedding& positive, const Embedding& negative,
                        double margin);

/// L(a_i, b_i, b_j) + L(b_i, a_i, a_j) over paired sets a and b.
double bidirectional_loss(const MatrixD& a_set, const MatrixD& b_set, std::size_t i, std::size_t j,
                          double margin);

/// A uniformly drawn j != i in [0, m). BatchTooSmall for m < 2.
std::size_t sample_negatives(std::size_t m, std::size_t i, Rng& rng);

/// All ordered pairs for InBatchAll; one sampled negative per row otherwise.
std::vector<PairIndex> sample_pairs(std::size_t m, NegativeStrategy strategy, Rng& rng);

/// Mean bidirectional loss over the given pairs.
double batch_loss(const MatrixD& a_set, const MatrixD& b_set, const std::vector<PairIndex>& pairs,
                  double margin);
/// Mean over pairs drawn by cfg.negative_strategy from an Rng seeded with cfg.seed.
double batch_loss(const MatrixD& a_set, const MatrixD& b_set, const TrainConfig& cfg);

struct ParamGradient {
  MatrixD weight;
  std::vector<double> bias;
};

struct LossAndGradient {
  double loss = 0.0;
  ParamGradient gradient;
};

/// Loss of batch_loss(encode_batch(params, features), targets) and its exact
/// gradient with respect to the encoder parameters. Inactive hinges (and
/// hinges sitting exactly on the kink) contribute nothing.
LossAndGradient loss_and_gradient(const EncoderParams& params, const MatrixD& features, const MatrixD& targets,
                                  const std::vector<PairIndex>& pairs, double margin);
/// Pairs drawn exactly as in batch_loss(a, b, cfg).
ParamGradient loss_gradient(const EncoderParams& params, const MatrixD& features, const MatrixD& targets,
                            const TrainConfig& cfg);

struct TrainResult {
  EncoderParams params;
  /// Entry e is the full-set loss after e epochs; entry 0 is the initial loss.
  std::vector<double> loss_trace;
};

/// Plain mini-batch SGD. Each epoch reshuffles rows with the seeded stream and
/// steps once per batch; a trailing batch of one row is folded into the
/// previous batch. Throws NonFiniteLoss naming the epoch.
TrainResult train(EncoderParams params, const MatrixD& features, const MatrixD& targets, const TrainConfig& cfg);

/// "epoch,mean_loss" header followed by one line per trace entry.
void write_loss_trace(const std::filesystem::path& path, const std::vector<double>& trace);
std::vector<double> read_loss_trace(const std::filesystem::path& path);

}  // namespace recipesnap
