#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recipesnap/embedding.hpp"

namespace recipesnap {

struct RecipeRecord {
  std::string id;
  std::string title;
  std::vector<std::string> ingredients;
  std::vector<std::string> instructions;
  std::optional<std::string> source_url;

  /// Throws FormatError when id or title is empty.
  void validate() const;

  friend bool operator==(const RecipeRecord&, const RecipeRecord&) = default;
};

/// Append-only pairing of an N x D float32 embedding matrix with an id-keyed
/// recipe dictionary. Row i always belongs to ids()[i].
///
/// Row norms are cached on insert so a query costs one pass over the matrix.
class RecipeLibrary {
 public:
  explicit RecipeLibrary(std::size_t dim);

  /// Rows appear in input order. Throws DimensionMismatch or DuplicateId.
  static RecipeLibrary build(std::vector<std::pair<RecipeRecord, Embedding>> pairs, std::size_t dim);

  /// Appends one row. Strong guarantee: on error the library is unchanged.
  void add_entry(RecipeRecord record, const Embedding& embedding);
  /// Same, for a row already in storage precision.
  void add_entry(RecipeRecord record, std::span<const float> row);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return ids_.empty(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id_at(std::size_t row) const { return ids_.at(row); }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
  std::span<const float> matrix() const noexcept { return values_; }
  std::span<const double> row_norms() const noexcept { return norms_; }

  bool contains(const std::string& id) const { return index_.contains(id); }
  std::optional<std::size_t> row_of(const std::string& id) const;

  /// Throws NotFound(id).
  const RecipeRecord& get_recipe(const std::string& id) const;
  const RecipeRecord& record_at(std::size_t row) const { return records_.at(ids_.at(row)); }

  /// Exact structural equality: same rows in the same order with bit-identical values.
  friend bool operator==(const RecipeLibrary& a, const RecipeLibrary& b);

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, RecipeRecord> records_;
};

}  // namespace recipesnap
