#include "recipesnap/embedding.hpp"

#include <algorithm>
#include <string>

namespace recipesnap {

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(Errc::InvalidDimension, "embedding must have at least one entry");
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); }))
    throw Error(Errc::NonFinite, "embedding contains NaN or Inf");
}

namespace {

void require_same_dim(std::size_t a, std::size_t b) {
  if (a != b)
    throw Error(Errc::DimensionMismatch, "dimensions differ: " + std::to_string(a) + " vs " + std::to_string(b));
}

template <typename T, typename U>
double cosine_impl(std::span<const T> a, std::span<const U> b) {
  require_same_dim(a.size(), b.size());
  const double na = kernel::norm(a.data(), a.size());
  const double nb = kernel::norm(b.data(), b.size());
  if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "cosine similarity of a zero vector");
  // Symmetric: the product of norms and the dot are both order-independent.
  return kernel::cosine_from(kernel::dot(a.data(), b.data(), a.size()), na, nb);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size());
  return kernel::dot(a.data(), b.data(), a.size());
}

double dot(const Embedding& a, const Embedding& b) { return dot(a.values(), b.values()); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) { return cosine_impl(a, b); }
double cosine_similarity(std::span<const float> a, std::span<const double> b) { return cosine_impl(a, b); }
double cosine_similarity(const Embedding& a, const Embedding& b) { return cosine_impl(a.values(), b.values()); }

double l2_norm(std::span<const double> a) { return kernel::norm(a.data(), a.size()); }

Embedding l2_normalize(const Embedding& a) {
  const double n = l2_norm(a.values());
  if (n == 0.0) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v /= n;
  return Embedding(std::move(out));
}

}  // namespace recipesnap
