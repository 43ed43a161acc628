#include "recipesnap/triplet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"

namespace recipesnap {

void TrainConfig::validate() const {
  if (!(margin >= 0.0 && margin <= 2.0)) throw Error(Errc::InvalidConfig, "margin must lie in [0, 2]");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error(Errc::InvalidConfig, "learning rate must be finite and non-negative");
  if (batch_size < 2) throw Error(Errc::InvalidConfig, "batch size must be at least 2");
}

double triplet_cos_loss(std::span<const double> anchor, std::span<const double> positive,
                        std::span<const double> negative, double margin) {
  const double neg = cosine_similarity(anchor, negative);
  const double pos = cosine_similarity(anchor, positive);
  return std::max(0.0, neg - pos + margin);
}

double triplet_cos_loss(const Embedding& anchor, const Embedding& positive, const Embedding& negative,
                        double margin) {
  return triplet_cos_loss(anchor.values(), positive.values(), negative.values(), margin);
}

namespace {

void require_paired(const MatrixD& a_set, const MatrixD& b_set) {
  if (a_set.rows() != b_set.rows() || a_set.cols() != b_set.cols())
    throw Error(Errc::DimensionMismatch, "paired sets must have equal shape");
}

void check_pairs(const std::vector<PairIndex>& pairs, std::size_t m) {
  if (m < 2) throw Error(Errc::BatchTooSmall, "need at least 2 rows, got " + std::to_string(m));
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no pairs to aggregate");
  for (const auto& [i, j] : pairs) {
    if (i >= m || j >= m) throw Error(Errc::IndexOutOfRange, "pair index beyond batch of " + std::to_string(m));
    if (i == j) throw Error(Errc::SameIndex, "pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  }
}

std::vector<double> row_norms(const MatrixD& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out[r] = kernel::norm(m.row(r).data(), m.cols());
    if (out[r] == 0.0) throw Error(Errc::ZeroVector, "row " + std::to_string(r) + " is all zeros");
    if (!std::isfinite(out[r])) throw Error(Errc::NonFinite, "row " + std::to_string(r) + " has a non-finite norm");
  }
  return out;
}

// Cosines of a_k against b_l, from cached norms.
struct CosineCache {
  const MatrixD& a;
  const MatrixD& b;
  std::vector<double> a_norm;
  std::vector<double> b_norm;
  std::vector<double> diag;  // cos(a_i, b_i)

  CosineCache(const MatrixD& a_set, const MatrixD& b_set)
      : a(a_set), b(b_set), a_norm(row_norms(a_set)), b_norm(row_norms(b_set)), diag(a_set.rows()) {
    for (std::size_t i = 0; i < a.rows(); ++i) diag[i] = cos(i, i);
  }

  double cos(std::size_t k, std::size_t l) const noexcept {
    return kernel::cosine_from(kernel::dot(a.row(k).data(), b.row(l).data(), a.cols()), a_norm[k], b_norm[l]);
  }
};

// Both hinge arguments of each pair:
//   forward  = cos(a_i, b_j) - cos(a_i, b_i) + m
//   backward = cos(b_i, a_j) - cos(b_i, a_i) + m
struct PairTerms {
  std::vector<double> cos_forward;   // cos(a_i, b_j)
  std::vector<double> cos_backward;  // cos(a_j, b_i)
};

PairTerms pair_terms(const CosineCache& cache, const std::vector<PairIndex>& pairs) {
  PairTerms t;
  t.cos_forward.resize(pairs.size());
  t.cos_backward.resize(pairs.size());
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static) if (count > 1024)
  for (std::ptrdiff_t p = 0; p < count; ++p) {
    const auto [i, j] = pairs[static_cast<std::size_t>(p)];
    t.cos_forward[static_cast<std::size_t>(p)] = cache.cos(i, j);
    t.cos_backward[static_cast<std::size_t>(p)] = cache.cos(j, i);
  }
  return t;
}

double mean_loss(const CosineCache& cache, const std::vector<PairIndex>& pairs, const PairTerms& t, double margin) {
  // Summed in pair order so the value does not depend on the thread count.
  double total = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double d = cache.diag[pairs[p].first];
    total += std::max(0.0, t.cos_forward[p] - d + margin);
    total += std::max(0.0, t.cos_backward[p] - d + margin);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

double bidirectional_loss(const MatrixD& a_set, const MatrixD& b_set, std::size_t i, std::size_t j, double margin) {
  require_paired(a_set, b_set);
  const std::size_t m = a_set.rows();
  if (i >= m || j >= m)
    throw Error(Errc::IndexOutOfRange, "indices (" + std::to_string(i) + ", " + std::to_string(j) +
                                           ") with " + std::to_string(m) + " rows");
  if (i == j) throw Error(Errc::SameIndex, "i and j are both " + std::to_string(i));
  return triplet_cos_loss(a_set.row(i), b_set.row(i), b_set.row(j), margin) +
         triplet_cos_loss(b_set.row(i), a_set.row(i), a_set.row(j), margin);
}

std::size_t sample_negatives(std::size_t m, std::size_t i, Rng& rng) {
  if (m < 2) throw Error(Errc::BatchTooSmall, "need at least 2 rows to draw a negative");
  if (i >= m) throw Error(Errc::IndexOutOfRange, "anchor index " + std::to_string(i));
  std::size_t j = rng.uniform_index(m - 1);
  if (j >= i) ++j;
  return j;
}

std::vector<PairIndex> sample_pairs(std::size_t m, NegativeStrategy strategy, Rng& rng) {
  if (m < 2) throw Error(Errc::BatchTooSmall, "need at least 2 rows, got " + std::to_string(m));
  std::vector<PairIndex> pairs;
  if (strategy == NegativeStrategy::InBatchAll) {
    pairs.reserve(m * (m - 1));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j) pairs.emplace_back(i, j);
  } else {
    pairs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) pairs.emplace_back(i, sample_negatives(m, i, rng));
  }
  return pairs;
}

double batch_loss(const MatrixD& a_set, const MatrixD& b_set, const std::vector<PairIndex>& pairs, double margin) {
  require_paired(a_set, b_set);
  check_pairs(pairs, a_set.rows());
  const CosineCache cache(a_set, b_set);
  return mean_loss(cache, pairs, pair_terms(cache, pairs), margin);
}

double batch_loss(const MatrixD& a_set, const MatrixD& b_set, const TrainConfig& cfg) {
  if (a_set.rows() < 2) throw Error(Errc::BatchTooSmall, "need at least 2 rows, got " + std::to_string(a_set.rows()));
  Rng rng(cfg.seed);
  return batch_loss(a_set, b_set, sample_pairs(a_set.rows(), cfg.negative_strategy, rng), cfg.margin);
}

LossAndGradient loss_and_gradient(const EncoderParams& params, const MatrixD& features, const MatrixD& targets,
                                  const std::vector<PairIndex>& pairs, double margin) {
  params.validate();
  if (features.rows() != targets.rows())
    throw Error(Errc::DimensionMismatch, "features and targets have different row counts");
  if (targets.cols() != params.embedding_dim())
    throw Error(Errc::DimensionMismatch, "targets width differs from encoder output dim");

  MatrixD pre;
  const MatrixD a = encode_batch(params, features, &pre);
  check_pairs(pairs, a.rows());
  const CosineCache cache(a, targets);
  const PairTerms terms = pair_terms(cache, pairs);

  const std::size_t m = a.rows();
  const std::size_t d_dim = a.cols();
  const double scale = 1.0 / static_cast<double>(pairs.size());

  // dL/da_k = sum_l w_kl * dcos(a_k, b_l)/da_k, with
  //   dcos(a, b)/da = b / (|a||b|) - cos(a, b) * a / |a|^2.
  // Off-diagonal terms go straight into grad_a; the -1 weights on cos(a_i, b_i)
  // are tallied per row and applied once.
  MatrixD grad_a(m, d_dim);
  std::vector<double> diag_weight(m, 0.0);
  double total = 0.0;
  auto add_cos_grad = [&](std::size_t k, std::size_t l, double c, double w) {
    const double inv_ab = w / (cache.a_norm[k] * cache.b_norm[l]);
    const double inv_aa = w * c / (cache.a_norm[k] * cache.a_norm[k]);
    auto g = grad_a.row(k);
    const auto bl = targets.row(l);
    const auto ak = a.row(k);
    for (std::size_t d = 0; d < d_dim; ++d) g[d] += inv_ab * bl[d] - inv_aa * ak[d];
  };
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    const double diag = cache.diag[i];
    const double forward = terms.cos_forward[p] - diag + margin;
    if (forward > 0.0) {
      total += forward;
      add_cos_grad(i, j, terms.cos_forward[p], scale);
      diag_weight[i] -= scale;
    }
    const double backward = terms.cos_backward[p] - diag + margin;
    if (backward > 0.0) {
      total += backward;
      add_cos_grad(j, i, terms.cos_backward[p], scale);
      diag_weight[i] -= scale;
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    if (diag_weight[k] != 0.0) add_cos_grad(k, k, cache.diag[k], diag_weight[k]);

  // Back through the activation.
  if (params.activation == Activation::Tanh) {
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t d = 0; d < d_dim; ++d) grad_a(k, d) *= 1.0 - a(k, d) * a(k, d);
  }

  LossAndGradient out;
  out.loss = total * scale;
  const std::size_t f_dim = params.feature_dim();
  out.gradient.weight = MatrixD(f_dim, d_dim);
  out.gradient.bias.assign(d_dim, 0.0);
  const auto f_rows = static_cast<std::ptrdiff_t>(f_dim);
#pragma omp parallel for schedule(static) if (f_dim * m * d_dim > 65536)
  for (std::ptrdiff_t fi = 0; fi < f_rows; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    auto gw = out.gradient.weight.row(f);
    for (std::size_t k = 0; k < m; ++k) {
      const double x = features(k, f);
      const auto gk = grad_a.row(k);
      for (std::size_t d = 0; d < d_dim; ++d) gw[d] += x * gk[d];
    }
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t d = 0; d < d_dim; ++d) out.gradient.bias[d] += grad_a(k, d);
  return out;
}

ParamGradient loss_gradient(const EncoderParams& params, const MatrixD& features, const MatrixD& targets,
                            const TrainConfig& cfg) {
  if (features.rows() < 2)
    throw Error(Errc::BatchTooSmall, "need at least 2 rows, got " + std::to_string(features.rows()));
  Rng rng(cfg.seed);
  const auto pairs = sample_pairs(features.rows(), cfg.negative_strategy, rng);
  return loss_and_gradient(params, features, targets, pairs, cfg.margin).gradient;
}

namespace {

MatrixD gather_rows(const MatrixD& src, std::span<const std::size_t> rows) {
  MatrixD out(rows.size(), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto from = src.row(rows[r]);
    std::copy(from.begin(), from.end(), out.row(r).begin());
  }
  return out;
}

void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss))
    throw Error(Errc::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
}

}  // namespace

TrainResult train(EncoderParams params, const MatrixD& features, const MatrixD& targets, const TrainConfig& cfg) {
  cfg.validate();
  params.validate();
  const std::size_t m = features.rows();
  if (m != targets.rows()) throw Error(Errc::DimensionMismatch, "features and targets have different row counts");
  if (m < 2) throw Error(Errc::BatchTooSmall, "need at least 2 training pairs, got " + std::to_string(m));
  if (features.cols() != params.feature_dim())
    throw Error(Errc::DimensionMismatch, "feature width differs from encoder input dim");
  if (targets.cols() != params.embedding_dim())
    throw Error(Errc::DimensionMismatch, "target width differs from encoder output dim");

  auto full_loss = [&] { return batch_loss(encode_batch(params, features), targets, cfg); };
  // Overflowing activations surface as NonFinite from the cosine code.
  auto guarded = [](std::size_t epoch, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.code() != Errc::NonFinite) throw;
      throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
    }
  };

  TrainResult result;
  result.loss_trace.reserve(cfg.epochs + 1);
  result.loss_trace.push_back(guarded(0, full_loss));
  check_finite_loss(result.loss_trace.back(), 0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min(cfg.batch_size, m);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

    for (std::size_t start = 0; start < m;) {
      std::size_t stop = std::min(start + batch, m);
      if (m - stop == 1) stop = m;  // no single-row tail batch
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const MatrixD xb = gather_rows(features, rows);
      const MatrixD bb = gather_rows(targets, rows);
      const auto pairs = sample_pairs(rows.size(), cfg.negative_strategy, rng);
      const auto step = guarded(epoch, [&] { return loss_and_gradient(params, xb, bb, pairs, cfg.margin); });
      check_finite_loss(step.loss, epoch);

      auto w = params.weight.data();
      auto gw = step.gradient.weight.data();
      for (std::size_t q = 0; q < w.size(); ++q) w[q] -= cfg.learning_rate * gw[q];
      for (std::size_t d = 0; d < params.bias.size(); ++d) params.bias[d] -= cfg.learning_rate * step.gradient.bias[d];
      const bool finite = std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }) &&
                          std::all_of(params.bias.begin(), params.bias.end(), [](double v) { return std::isfinite(v); });
      if (!finite) throw Error(Errc::NonFiniteLoss, "parameters diverged in epoch " + std::to_string(epoch));
      start = stop;
    }

    result.loss_trace.push_back(guarded(epoch, full_loss));
    check_finite_loss(result.loss_trace.back(), epoch);
  }
  result.params = std::move(params);
  return result;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::string text = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < trace.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, trace[e]);
    text += buf;
  }
  binary::write_file(path, text);
}

std::vector<double> read_loss_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,mean_loss")
    throw Error(Errc::FormatError, path.string() + ": missing 'epoch,mean_loss' header");
  std::vector<double> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      if (std::stoull(line.substr(0, comma)) != trace.size()) throw std::invalid_argument("epoch out of sequence");
      trace.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception& e) {
      throw Error(Errc::FormatError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace recipesnap
