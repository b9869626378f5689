#include "glseg/core/hash.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "glseg/core/error.hpp"

namespace glseg {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot hash missing file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

}  // namespace glseg
