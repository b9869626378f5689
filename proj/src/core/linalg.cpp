#include "glseg/core/linalg.hpp"

#include <cmath>

#include "glseg/core/error.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Mat cholesky(const Mat& a) {
  if (a.rows != a.cols) fail(ErrorCode::internal, "cholesky: matrix not square");
  const std::size_t n = a.rows;
  Mat l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (s <= 0.0) {
          fail(ErrorCode::numeric, "matrix is not positive definite");
        }
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

std::vector<double> solve_upper_from_lower(const Mat& lower,
                                           std::span<const double> b) {
  const std::size_t n = lower.rows;
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t j = ii + 1; j < n; ++j) s -= lower.at(j, ii) * x[j];
    x[ii] = s / lower.at(ii, ii);
  }
  return x;
}

Mat spd_inverse(const Mat& a) {
  const std::size_t n = a.rows;
  const Mat l = cholesky(a);
  Mat inv(n, n);
  std::vector<double> e(n, 0.0), y(n);
  for (std::size_t col = 0; col < n; ++col) {
    e.assign(n, 0.0);
    e[col] = 1.0;
    // forward: L y = e
    for (std::size_t i = 0; i < n; ++i) {
      double s = e[i];
      for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
      y[i] = s / l.at(i, i);
    }
    // backward: L^T x = y
    auto x = solve_upper_from_lower(l, y);
    for (std::size_t i = 0; i < n; ++i) inv.at(i, col) = x[i];
  }
  // symmetrize against round-off
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (inv.at(i, j) + inv.at(j, i));
      inv.at(i, j) = v;
      inv.at(j, i) = v;
    }
  }
  return inv;
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols != b.rows) fail(ErrorCode::internal, "matmul: shape mismatch");
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      simd::axpy(aik, b.row(k), c.row(i));
    }
  }
  return c;
}

double frobenius_inner(const Mat& a, const Mat& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    fail(ErrorCode::internal, "frobenius_inner: shape mismatch");
  }
  return simd::active().dot(a.data.data(), b.data.data(), a.data.size());
}

}  // namespace glseg
