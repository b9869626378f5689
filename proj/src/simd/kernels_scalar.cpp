#include "glseg/simd/kernels.hpp"

// Reference kernels. Plain sequential loops, no reassociation: these define
// the semantics the vector backends are tested against.

namespace glseg::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sumsq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sqdist_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void affine_scalar(double* x, std::size_t n, double a, double b) {
  for (std::size_t i = 0; i < n; ++i) x[i] = a * x[i] + b;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{dot_scalar,    sum_scalar,  sumsq_scalar,
                                 sqdist_scalar, axpy_scalar, affine_scalar};
  return table;
}

}  // namespace glseg::simd
