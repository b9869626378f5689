#include "glseg/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace glseg::simd {

#if defined(GLSEG_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

namespace {

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(GLSEG_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect() {
  if (const char* env = std::getenv("GLSEG_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_supports(Backend::avx2)) return Backend::avx2;
    if (std::strcmp(env, "neon") == 0 && cpu_supports(Backend::neon)) return Backend::neon;
    // "auto" or unrecognized falls through to detection
  }
  if (cpu_supports(Backend::avx2)) return Backend::avx2;
  if (cpu_supports(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& table_of(Backend b) {
  switch (b) {
#if defined(GLSEG_HAVE_AVX2)
    case Backend::avx2:
      return avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

Backend g_backend = detect();

}  // namespace

const KernelTable& active() { return table_of(g_backend); }

Backend active_backend() { return g_backend; }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool set_backend(Backend b) {
  if (!cpu_supports(b)) return false;
  g_backend = b;
  return true;
}

void reset_backend() { g_backend = detect(); }

}  // namespace glseg::simd
