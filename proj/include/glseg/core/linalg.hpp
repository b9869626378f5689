#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace glseg {

// Small dense row-major matrix. Everything here is sized S x S or k x S with
// S in the tens; the N-length work lives in the simd kernels.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  static Mat identity(std::size_t n);
};

// Lower-triangular Cholesky factor of an SPD matrix; throws
// Error(numeric) if the matrix is not positive definite.
Mat cholesky(const Mat& a);

// Solve L^T x = b for upper-triangular L^T given lower L (back substitution).
std::vector<double> solve_upper_from_lower(const Mat& lower,
                                           std::span<const double> b);

// Inverse of an SPD matrix via its Cholesky factor.
Mat spd_inverse(const Mat& a);

Mat matmul(const Mat& a, const Mat& b);

// Sum of elementwise products; equals tr(a * b) for symmetric a, b.
double frobenius_inner(const Mat& a, const Mat& b);

}  // namespace glseg
