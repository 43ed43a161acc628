#include "recipesnap/library.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace recipesnap {

void RecipeRecord::validate() const {
  if (id.empty()) throw Error(Errc::FormatError, "recipe id must be non-empty");
  if (title.empty()) throw Error(Errc::FormatError, "recipe '" + id + "' has an empty title");
}

RecipeLibrary::RecipeLibrary(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(Errc::InvalidDimension, "library dimension must be >= 1");
}

RecipeLibrary RecipeLibrary::build(std::vector<std::pair<RecipeRecord, Embedding>> pairs, std::size_t dim) {
  RecipeLibrary lib(dim);
  lib.ids_.reserve(pairs.size());
  lib.values_.reserve(pairs.size() * dim);
  lib.norms_.reserve(pairs.size());
  for (auto& [record, embedding] : pairs) lib.add_entry(std::move(record), embedding);
  return lib;
}

namespace {

// Reserve room for `extra` more elements while keeping amortized doubling.
template <typename V>
void grow(V& v, std::size_t extra) {
  const std::size_t need = v.size() + extra;
  if (need > v.capacity()) v.reserve(std::max(need, 2 * v.capacity()));
}

}  // namespace

void RecipeLibrary::add_entry(RecipeRecord record, const Embedding& embedding) {
  if (embedding.dim() != dim_)
    throw Error(Errc::DimensionMismatch, "embedding for '" + record.id + "' has dim " +
                                             std::to_string(embedding.dim()) + ", library dim is " +
                                             std::to_string(dim_));
  std::vector<float> row(embedding.values().begin(), embedding.values().end());
  add_entry(std::move(record), row);
}

void RecipeLibrary::add_entry(RecipeRecord record, std::span<const float> row) {
  record.validate();
  if (row.size() != dim_)
    throw Error(Errc::DimensionMismatch, "embedding for '" + record.id + "' has dim " + std::to_string(row.size()) +
                                             ", library dim is " + std::to_string(dim_));
  if (index_.contains(record.id)) throw Error(Errc::DuplicateId, record.id);
  for (float v : row)
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "embedding for '" + record.id + "' is not finite in float32");
  const double n = kernel::norm(row.data(), row.size());
  if (n == 0.0) throw Error(Errc::ZeroVector, "embedding for '" + record.id + "' is all zeros");

  // Reserve everything first so that nothing below can throw halfway.
  grow(ids_, 1);
  grow(values_, dim_);
  grow(norms_, 1);
  index_.reserve(index_.size() + 1);
  records_.reserve(records_.size() + 1);

  const std::string id = record.id;
  std::string row_id = id;
  auto [it, inserted] = records_.emplace(id, std::move(record));
  try {
    index_.emplace(id, ids_.size());
  } catch (...) {
    records_.erase(it);
    throw;
  }
  ids_.push_back(std::move(row_id));
  values_.insert(values_.end(), row.begin(), row.end());
  norms_.push_back(n);
}

std::optional<std::size_t> RecipeLibrary::row_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const RecipeRecord& RecipeLibrary::get_recipe(const std::string& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw Error(Errc::NotFound, id);
  return it->second;
}

bool operator==(const RecipeLibrary& a, const RecipeLibrary& b) {
  if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.records_ != b.records_) return false;
  if (a.values_.size() != b.values_.size()) return false;
  return std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
}

}  // namespace recipesnap
