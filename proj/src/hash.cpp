#include "canopy/hash.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "canopy/errors.hpp"

namespace canopy {

std::string to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ull;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(std::string_view(buf.data(), static_cast<size_t>(in.gcount())), h);
  }
  return h;
}

std::string fnv1a_file_hex(const std::filesystem::path& path) {
  return to_hex(fnv1a_file(path));
}

}  // namespace canopy
