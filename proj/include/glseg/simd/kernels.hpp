#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace glseg::simd {

enum class Backend { scalar, avx2, neon };

// Table of the numeric primitives every hot loop in the library goes through.
// Each backend fills one of these; dispatch picks a table once at startup.
struct KernelTable {
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  double (*sqdist)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x = a * x + b
  void (*affine)(double* x, std::size_t n, double a, double b);
};

// Active table. Chosen on first use from CPU features, overridable with the
// GLSEG_SIMD environment variable (scalar|avx2|neon|auto) or set_backend().
const KernelTable& active();
Backend active_backend();
std::string_view backend_name(Backend b);

// Force a backend; returns false (and leaves the state unchanged) if the
// requested backend is not available in this build/CPU. Not thread-safe:
// intended for tests and benchmarks before compute starts.
bool set_backend(Backend b);
void reset_backend();

// Reference table; always available and the yardstick in equivalence tests.
const KernelTable& scalar_table();

inline double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active().dot(x.data(), y.data(), x.size());
}
inline double sum(std::span<const double> x) {
  return active().sum(x.data(), x.size());
}
inline double sumsq(std::span<const double> x) {
  return active().sumsq(x.data(), x.size());
}
inline double sqdist(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return active().sqdist(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(a, x.data(), y.data(), x.size());
}
inline void affine(std::span<double> x, double a, double b) {
  active().affine(x.data(), x.size(), a, b);
}

}  // namespace glseg::simd
