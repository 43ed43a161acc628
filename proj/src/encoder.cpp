#include "recipesnap/encoder.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "recipesnap/rng.hpp"

namespace recipesnap {

namespace {

constexpr char kParamsMagic[4] = {'R', 'S', 'P', 'E'};
constexpr std::uint32_t kParamsVersion = 1;

double activate(Activation act, double z) noexcept { return act == Activation::Tanh ? std::tanh(z) : z; }

// out = activation(x^T W + bias); pre receives x^T W + bias when non-null.
void encode_row(const EncoderParams& p, std::span<const double> x, double* out, double* pre) {
  const std::size_t f_dim = p.feature_dim();
  const std::size_t d_dim = p.embedding_dim();
  for (std::size_t d = 0; d < d_dim; ++d) out[d] = p.bias[d];
  for (std::size_t f = 0; f < f_dim; ++f) {
    const double xf = x[f];
    const auto w = p.weight.row(f);
    for (std::size_t d = 0; d < d_dim; ++d) out[d] += xf * w[d];
  }
  if (pre != nullptr)
    for (std::size_t d = 0; d < d_dim; ++d) pre[d] = out[d];
  for (std::size_t d = 0; d < d_dim; ++d) out[d] = activate(p.activation, out[d]);
}

}  // namespace

void EncoderParams::validate() const {
  if (weight.rows() == 0 || weight.cols() == 0)
    throw Error(Errc::InvalidDimension, "encoder needs F >= 1 and D >= 1");
  if (bias.size() != weight.cols()) throw Error(Errc::DimensionMismatch, "bias length differs from D");
  for (double w : weight.data())
    if (!std::isfinite(w)) throw Error(Errc::NonFinite, "encoder weight is not finite");
  for (double b : bias)
    if (!std::isfinite(b)) throw Error(Errc::NonFinite, "encoder bias is not finite");
  if (activation != Activation::Identity && activation != Activation::Tanh)
    throw Error(Errc::FormatError, "unknown activation");
}

EncoderParams init_params(std::size_t feature_dim, std::size_t embedding_dim, std::uint64_t seed,
                          Activation activation) {
  if (feature_dim == 0 || embedding_dim == 0) throw Error(Errc::InvalidDimension, "encoder needs F >= 1 and D >= 1");
  const double s = std::sqrt(6.0 / static_cast<double>(feature_dim + embedding_dim));
  Rng rng(seed);
  EncoderParams p;
  p.weight = MatrixD(feature_dim, embedding_dim);
  for (double& w : p.weight.data()) {
    // Rounding can nudge a draw just past s; keep the bound exact.
    double v = static_cast<float>(rng.uniform(-s, s));
    if (std::abs(v) > s) v = std::nextafter(static_cast<float>(v), 0.0f);
    w = v;
  }
  p.bias.assign(embedding_dim, 0.0);
  p.activation = activation;
  return p;
}

Embedding encode(const EncoderParams& params, std::span<const double> features) {
  if (features.size() != params.feature_dim())
    throw Error(Errc::DimensionMismatch, "feature vector has length " + std::to_string(features.size()) +
                                             ", encoder expects " + std::to_string(params.feature_dim()));
  for (double v : features)
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "feature vector is not finite");
  std::vector<double> out(params.embedding_dim());
  encode_row(params, features, out.data(), nullptr);
  return Embedding(std::move(out));
}

MatrixD encode_batch(const EncoderParams& params, const MatrixD& features) {
  return encode_batch(params, features, nullptr);
}

MatrixD encode_batch(const EncoderParams& params, const MatrixD& features, MatrixD* pre_activation) {
  if (features.rows() > 0 && features.cols() != params.feature_dim())
    throw Error(Errc::DimensionMismatch, "feature matrix has " + std::to_string(features.cols()) +
                                             " columns, encoder expects " + std::to_string(params.feature_dim()));
  const std::size_t m = features.rows();
  MatrixD out(m, params.embedding_dim());
  if (pre_activation != nullptr) *pre_activation = MatrixD(m, params.embedding_dim());
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m > 64)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    encode_row(params, features.row(r), out.row(r).data(),
               pre_activation != nullptr ? pre_activation->row(r).data() : nullptr);
  }
  return out;
}

void round_to_storage(EncoderParams& params) {
  for (double& w : params.weight.data()) w = static_cast<float>(w);
  for (double& b : params.bias) b = static_cast<float>(b);
}

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  params.validate();
  std::vector<char> out;
  binary::append_bytes(out, kParamsMagic);
  binary::append_le<std::uint32_t>(out, kParamsVersion);
  binary::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.feature_dim()));
  binary::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.embedding_dim()));
  binary::append_le<std::uint8_t>(out, static_cast<std::uint8_t>(params.activation));
  for (double w : params.weight.data()) binary::append_le<float>(out, static_cast<float>(w));
  for (double b : params.bias) binary::append_le<float>(out, static_cast<float>(b));
  binary::write_file(path, out);
}

EncoderParams load_params(const std::filesystem::path& path) {
  const auto data = binary::read_file(path);
  binary::Reader in(data, path.string());
  auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kParamsMagic))
    throw Error(Errc::FormatError, path.string() + ": bad magic, expected RSPE");
  const auto version = in.read_le<std::uint32_t>("version");
  if (version != kParamsVersion)
    throw Error(Errc::FormatError, path.string() + ": unsupported version " + std::to_string(version));
  const auto f_dim = in.read_le<std::uint32_t>("F");
  const auto d_dim = in.read_le<std::uint32_t>("D");
  const auto act = in.read_le<std::uint8_t>("activation");
  if (f_dim == 0 || d_dim == 0) throw Error(Errc::FormatError, path.string() + ": zero dimension");
  if (act > 1) throw Error(Errc::FormatError, path.string() + ": unknown activation " + std::to_string(act));
  const std::uint64_t expected = (std::uint64_t{f_dim} * d_dim + d_dim) * sizeof(float);
  if (in.remaining() != expected)
    throw Error(Errc::FormatError, path.string() + ": expected " + std::to_string(expected) + " payload bytes, found " +
                                       std::to_string(in.remaining()));

  EncoderParams p;
  p.weight = MatrixD(f_dim, d_dim);
  for (double& w : p.weight.data()) w = in.read_le<float>("weights");
  p.bias.resize(d_dim);
  for (double& b : p.bias) b = in.read_le<float>("bias");
  p.activation = static_cast<Activation>(act);
  p.validate();
  return p;
}

}  // namespace recipesnap
