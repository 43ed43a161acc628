#pragma once

// Little-endian primitives shared by the .rsnp and .rspe readers/writers.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "recipesnap/error.hpp"

namespace recipesnap::binary {

template <typename T>
void append_le(std::vector<char>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

inline void append_bytes(std::vector<char>& out, std::span<const char> bytes) {
  out.insert(out.end(), bytes.begin(), bytes.end());
}

/// Bounds-checked cursor over a file image. Running off the end is a FormatError.
class Reader {
 public:
  Reader(std::span<const char> data, std::string name) : data_(data), name_(std::move(name)) {}

  template <typename T>
  T read_le(const char* what) {
    auto bytes = take(sizeof(T), what);
    std::array<char, sizeof(T)> buf;
    std::copy(bytes.begin(), bytes.end(), buf.begin());
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    T value;
    std::memcpy(&value, buf.data(), sizeof(T));
    return value;
  }

  std::span<const char> take(std::size_t n, const char* what) {
    if (n > remaining())
      throw Error(Errc::FormatError, name_ + ": truncated while reading " + what + " at offset " +
                                         std::to_string(pos_));
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t offset() const noexcept { return pos_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::span<const char> data_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoError, "read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const char> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

}  // namespace recipesnap::binary
