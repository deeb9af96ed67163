#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace canopy {

// 64-bit FNV-1a; cheap, stable across platforms, good enough for artifact
// fingerprints (no adversary here).
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t h);

inline std::string fnv1a_hex(std::string_view bytes) { return to_hex(fnv1a(bytes)); }

// Streaming hash of a file's contents. IoError if unreadable.
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string fnv1a_file_hex(const std::filesystem::path& path);

}  // namespace canopy
