#include "binary_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iterator>

namespace face_manifold::detail {

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot open '{}' for writing", tmp.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path, std::string_view kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(fmt::format("cannot open {} file '{}': file not found or unreadable", kind,
                            path.string()));
  }
  return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void BinaryReader::expect_magic(std::string_view tag) {
  if (remaining() < tag.size() ||
      std::string_view(bytes_).substr(pos_, tag.size()) != tag) {
    throw FormatError(fmt::format("{} file: bad magic bytes (expected \"{}\")", kind_, tag));
  }
  pos_ += tag.size();
}

void BinaryReader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError(
        fmt::format("{} file: {} unexpected trailing bytes", kind_, remaining()));
  }
}

void BinaryReader::truncated(std::string_view section, std::size_t wanted) const {
  throw TruncationError(fmt::format("{} file truncated in section '{}': need {} bytes, {} left",
                                    kind_, section, wanted, remaining()));
}

}  // namespace face_manifold::detail
