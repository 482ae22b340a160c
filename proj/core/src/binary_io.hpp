#pragma once

// Little-endian primitives shared by the .fmm, .fds and .fwt readers/writers.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "face_manifold/errors.hpp"

namespace face_manifold::detail {

template <typename T>
T to_little_endian(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

/// Reads a whole file; throws Error naming `kind` when it cannot be opened.
std::string read_file(const std::filesystem::path& path, std::string_view kind);

/// Writes via a temporary sibling so readers never observe a partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

class BinaryWriter {
 public:
  void magic(std::string_view tag) { buffer_.append(tag); }

  template <typename T>
  void put(T value) {
    const T le = to_little_endian(value);
    const auto* p = reinterpret_cast<const char*>(&le);
    buffer_.append(p, sizeof(T));
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    buffer_.reserve(buffer_.size() + values.size() * sizeof(T));
    for (const T v : values) put(v);
  }

  const std::string& bytes() const { return buffer_; }


 private:
  std::string buffer_;
};

class BinaryReader {
 public:
  BinaryReader(std::string bytes, std::string kind)
      : bytes_(std::move(bytes)), kind_(std::move(kind)) {}

  void expect_magic(std::string_view tag);

  template <typename T>
  T get(std::string_view section) {
    require(sizeof(T), section);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little_endian(value);
  }

  template <typename T>
  std::vector<T> get_array(std::size_t count, std::string_view section) {
    if (count != 0 && count > remaining() / sizeof(T)) {
      truncated(section, count * sizeof(T));
    }
    std::vector<T> out(count);
    for (auto& v : out) v = get<T>(section);
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  /// Throws FormatError if bytes are left after the last section.
  void expect_end() const;

  [[noreturn]] void truncated(std::string_view section, std::size_t wanted) const;

 private:
  void require(std::size_t n, std::string_view section) const {
    if (remaining() < n) truncated(section, n);
  }

  std::string bytes_;
  std::string kind_;
  std::size_t pos_ = 0;
};

}  // namespace face_manifold::detail
