#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace glseg {

// FNV-1a, 64-bit. Used for config and file provenance hashes only.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xCBF29CE484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::string& path);

}  // namespace glseg
