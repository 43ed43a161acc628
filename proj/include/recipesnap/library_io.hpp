#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "recipesnap/library.hpp"

namespace recipesnap {

// .rsnp layout, little-endian:
//   "RSNP" | u32 version=1 | u64 N | u32 D | N x (u16 len, utf-8 id) | N*D f32 row-major
inline constexpr char kEmbeddingMagic[4] = {'R', 'S', 'N', 'P'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;  // ids.size() * dim

  std::span<const float> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
};

void write_embedding_file(const std::filesystem::path& path, const EmbeddingFile& file);
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

/// One JSON object per line: id, title, ingredients, instructions, source_url.
void write_records(const std::filesystem::path& path, const std::vector<RecipeRecord>& records);
std::vector<RecipeRecord> read_records(const std::filesystem::path& path);

std::string record_to_json(const RecipeRecord& record);
/// Parses one record object. `where` prefixes error messages.
RecipeRecord record_from_json(const std::string& text, const std::string& where = "record");

/// Joins an embedding matrix and a recipe dictionary. ConsistencyError when the
/// id sets differ.
RecipeLibrary assemble_library(const EmbeddingFile& embeddings, const std::vector<RecipeRecord>& records);

void save(const RecipeLibrary& lib, const std::filesystem::path& emb_path, const std::filesystem::path& rec_path);
RecipeLibrary load(const std::filesystem::path& emb_path, const std::filesystem::path& rec_path);

/// Writes both files to temporaries next to the targets, then renames them in
/// place. If anything throws before the renames, the targets are untouched and
/// the temporaries are removed. `before_commit` runs between the two phases.
void save_atomic(const RecipeLibrary& lib, const std::filesystem::path& emb_path,
                 const std::filesystem::path& rec_path,
                 const std::function<void()>& before_commit = {});

}  // namespace recipesnap
