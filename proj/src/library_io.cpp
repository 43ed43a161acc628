#include "recipesnap/library_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "json.hpp"

namespace recipesnap {

namespace fs = std::filesystem;
using nlohmann::json;

void write_embedding_file(const fs::path& path, const EmbeddingFile& file) {
  const std::size_t n = file.ids.size();
  if (file.dim == 0) throw Error(Errc::InvalidDimension, "embedding file dimension must be >= 1");
  if (file.values.size() != n * file.dim)
    throw Error(Errc::DimensionMismatch, "embedding values do not form an N x D matrix");

  std::vector<char> out;
  out.reserve(20 + n * (2 + 16) + file.values.size() * sizeof(float));
  binary::append_bytes(out, kEmbeddingMagic);
  binary::append_le<std::uint32_t>(out, kEmbeddingVersion);
  binary::append_le<std::uint64_t>(out, n);
  binary::append_le<std::uint32_t>(out, file.dim);
  for (const auto& id : file.ids) {
    if (id.size() > UINT16_MAX) throw Error(Errc::FormatError, "id longer than 65535 bytes: " + id.substr(0, 32));
    binary::append_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    binary::append_bytes(out, id);
  }
  for (float v : file.values) binary::append_le<float>(out, v);
  binary::write_file(path, out);
}

EmbeddingFile read_embedding_file(const fs::path& path) {
  const auto data = binary::read_file(path);
  binary::Reader in(data, path.string());

  auto magic = in.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kEmbeddingMagic))
    throw Error(Errc::FormatError, path.string() + ": bad magic, expected RSNP");
  const auto version = in.read_le<std::uint32_t>("version");
  if (version != kEmbeddingVersion)
    throw Error(Errc::FormatError, path.string() + ": unsupported version " + std::to_string(version));
  const auto n = in.read_le<std::uint64_t>("row count");
  EmbeddingFile file;
  file.dim = in.read_le<std::uint32_t>("dimension");
  if (file.dim == 0) throw Error(Errc::FormatError, path.string() + ": dimension is 0");
  // Every row needs at least 2 id bytes plus its floats; reject absurd counts
  // before allocating.
  if (n > in.remaining() / (2 + std::uint64_t{file.dim} * sizeof(float)))
    throw Error(Errc::FormatError, path.string() + ": truncated, header claims " + std::to_string(n) + " rows");

  file.ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = in.read_le<std::uint16_t>("id length");
    auto bytes = in.take(len, "id");
    file.ids.emplace_back(bytes.begin(), bytes.end());
  }
  file.values.resize(n * file.dim);
  for (auto& v : file.values) v = in.read_le<float>("embedding values");
  if (in.remaining() != 0)
    throw Error(Errc::FormatError, path.string() + ": " + std::to_string(in.remaining()) +
                                       " trailing bytes at offset " + std::to_string(in.offset()));
  return file;
}

std::string record_to_json(const RecipeRecord& r) {
  json j;
  j["id"] = r.id;
  j["title"] = r.title;
  j["ingredients"] = r.ingredients;
  j["instructions"] = r.instructions;
  j["source_url"] = r.source_url ? json(*r.source_url) : json(nullptr);
  return j.dump();
}

RecipeRecord record_from_json(const std::string& text, const std::string& where) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::FormatError, where + ": invalid JSON (" + e.what() + ")");
  }
  auto field = [&](const char* name) -> const json& {
    if (!j.is_object() || !j.contains(name)) throw Error(Errc::FormatError, where + ": missing field '" + name + "'");
    return j.at(name);
  };
  auto string_list = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_array()) throw Error(Errc::FormatError, where + ": '" + name + "' must be an array");
    std::vector<std::string> out;
    for (const auto& item : v) {
      if (!item.is_string()) throw Error(Errc::FormatError, where + ": '" + name + "' must hold strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  };

  RecipeRecord r;
  if (!field("id").is_string() || !field("title").is_string())
    throw Error(Errc::FormatError, where + ": 'id' and 'title' must be strings");
  r.id = j["id"].get<std::string>();
  r.title = j["title"].get<std::string>();
  r.ingredients = string_list("ingredients");
  r.instructions = string_list("instructions");
  if (j.contains("source_url") && !j["source_url"].is_null()) {
    if (!j["source_url"].is_string()) throw Error(Errc::FormatError, where + ": 'source_url' must be a string");
    r.source_url = j["source_url"].get<std::string>();
  }
  try {
    r.validate();
  } catch (const Error& e) {
    throw Error(Errc::FormatError, where + ": " + e.what());
  }
  return r;
}

void write_records(const fs::path& path, const std::vector<RecipeRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << record_to_json(r) << '\n';
  const std::string text = out.str();
  binary::write_file(path, text);
}

std::vector<RecipeRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<RecipeRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto record = record_from_json(line, path.string() + ":" + std::to_string(lineno));
    if (!seen.insert(record.id).second)
      throw Error(Errc::DuplicateId, record.id + " (" + path.string() + ":" + std::to_string(lineno) + ")");
    records.push_back(std::move(record));
  }
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  return records;
}

RecipeLibrary assemble_library(const EmbeddingFile& embeddings, const std::vector<RecipeRecord>& records) {
  std::unordered_set<std::string> matrix_ids;
  for (const auto& id : embeddings.ids)
    if (!matrix_ids.insert(id).second) throw Error(Errc::FormatError, "matrix id '" + id + "' appears twice");
  std::unordered_map<std::string, const RecipeRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.id, &r);
  for (const auto& id : embeddings.ids)
    if (!by_id.contains(id)) throw Error(Errc::ConsistencyError, "matrix id '" + id + "' has no recipe record");
  for (const auto& r : records)
    if (!matrix_ids.contains(r.id)) throw Error(Errc::ConsistencyError, "recipe '" + r.id + "' has no embedding row");

  RecipeLibrary lib(embeddings.dim);
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i)
    lib.add_entry(*by_id.at(embeddings.ids[i]), embeddings.row(i));
  return lib;
}

namespace {

EmbeddingFile to_embedding_file(const RecipeLibrary& lib) {
  EmbeddingFile file;
  file.dim = static_cast<std::uint32_t>(lib.dim());
  file.ids = lib.ids();
  file.values.assign(lib.matrix().begin(), lib.matrix().end());
  return file;
}

std::vector<RecipeRecord> records_in_row_order(const RecipeLibrary& lib) {
  std::vector<RecipeRecord> out;
  out.reserve(lib.size());
  for (std::size_t i = 0; i < lib.size(); ++i) out.push_back(lib.record_at(i));
  return out;
}

}  // namespace

void save(const RecipeLibrary& lib, const fs::path& emb_path, const fs::path& rec_path) {
  write_embedding_file(emb_path, to_embedding_file(lib));
  write_records(rec_path, records_in_row_order(lib));
}

RecipeLibrary load(const fs::path& emb_path, const fs::path& rec_path) {
  return assemble_library(read_embedding_file(emb_path), read_records(rec_path));
}

void save_atomic(const RecipeLibrary& lib, const fs::path& emb_path, const fs::path& rec_path,
                 const std::function<void()>& before_commit) {
  const fs::path emb_tmp = fs::path(emb_path) += ".tmp";
  const fs::path rec_tmp = fs::path(rec_path) += ".tmp";
  auto cleanup = [&] {
    std::error_code ec;
    if (fs::is_regular_file(emb_tmp, ec)) fs::remove(emb_tmp, ec);
    if (fs::is_regular_file(rec_tmp, ec)) fs::remove(rec_tmp, ec);
  };
  try {
    save(lib, emb_tmp, rec_tmp);
    if (before_commit) before_commit();
    // A crash between these two renames leaves a new matrix beside the old
    // dictionary; load() then reports a ConsistencyError rather than mixing rows.
    fs::rename(emb_tmp, emb_path);
    fs::rename(rec_tmp, rec_path);
  } catch (const fs::filesystem_error& e) {
    cleanup();
    throw Error(Errc::IoError, e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace recipesnap
