#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "recipesnap/error.hpp"

namespace recipesnap {

/// Default width of the shared space; every component takes the width as a parameter.
inline constexpr std::size_t kDefaultEmbeddingDim = 1024;

/// A vector in the shared query/recipe space. Always non-empty and finite.
class Embedding {
 public:
  explicit Embedding(std::vector<double> values);
  Embedding(std::initializer_list<double> values) : Embedding(std::vector<double>(values)) {}
  template <typename T, std::size_t N>
  explicit Embedding(std::span<T, N> values)
      : Embedding(std::vector<double>(values.begin(), values.end())) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

namespace kernel {

// Sequential accumulation in double. Every similarity in the project goes
// through this loop, so the serial and parallel scans agree bit for bit.
template <typename T, typename U>
inline double dot(const T* a, const U* b, std::size_t n) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
inline double norm(const T* a, std::size_t n) noexcept {
  return std::sqrt(dot(a, a, n));
}

inline double clamp_unit(double x) noexcept { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); }

/// Cosine from a raw dot product and the two norms.
inline double cosine_from(double dot_ab, double norm_a, double norm_b) noexcept {
  return clamp_unit(dot_ab / (norm_a * norm_b));
}

}  // namespace kernel

double dot(std::span<const double> a, std::span<const double> b);
double dot(const Embedding& a, const Embedding& b);

/// dot(a,b) / (|a| |b|), clamped to [-1, 1]. Throws ZeroVector on a zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const float> a, std::span<const double> b);
double cosine_similarity(const Embedding& a, const Embedding& b);

Embedding l2_normalize(const Embedding& a);

double l2_norm(std::span<const double> a);

}  // namespace recipesnap
