#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "recipesnap/embedding.hpp"
#include "recipesnap/matrix.hpp"

namespace recipesnap {

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1 };

/// Single affine layer mapping F input features to a D-dim embedding:
/// activation(x^T W + bias), W stored F x D row-major.
struct EncoderParams {
  MatrixD weight;
  std::vector<double> bias;
  Activation activation = Activation::Identity;

  std::size_t feature_dim() const noexcept { return weight.rows(); }
  std::size_t embedding_dim() const noexcept { return weight.cols(); }

  /// InvalidDimension / DimensionMismatch / NonFinite on a malformed struct.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Glorot-uniform weights in [-s, s], s = sqrt(6 / (F + D)), zero bias.
/// Draws are rounded to float32 so that persisted parameters reload exactly.
EncoderParams init_params(std::size_t feature_dim, std::size_t embedding_dim, std::uint64_t seed,
                          Activation activation = Activation::Identity);

Embedding encode(const EncoderParams& params, std::span<const double> features);

/// Row i of the result is encode(params, features.row(i)). Rows are
/// independent and computed in parallel.
MatrixD encode_batch(const EncoderParams& params, const MatrixD& features);

/// Same as encode_batch, but also returns the pre-activation values.
MatrixD encode_batch(const EncoderParams& params, const MatrixD& features, MatrixD* pre_activation);

// .rspe layout, little-endian:
//   "RSPE" | u32 version=1 | u32 F | u32 D | u8 activation | F*D f32 weights | D f32 bias
void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

/// Rounds every parameter to the nearest float32, the precision they are stored at.
void round_to_storage(EncoderParams& params);

}  // namespace recipesnap
