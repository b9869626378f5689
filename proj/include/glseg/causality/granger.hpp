#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glseg/dataset/dataset.hpp"
#include "glseg/supervised/classes.hpp"

namespace glseg {

// Column-major design matrix for least squares.
struct Design {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> data;  // column j at [j*n, (j+1)*n)
  std::vector<std::string> col_names;

  void add_column(std::span<const double> col, std::string name);
  std::span<const double> col(std::size_t j) const { return {data.data() + j * n, n}; }
};

struct OlsResult {
  std::vector<double> beta;
  double rss = 0.0;
};

// Least squares via Householder QR with column pivoting. Throws
// Error(numeric) naming the collinear columns when the design is rank
// deficient (relative pivot threshold 1e-10).
OlsResult ols(const Design& design, std::span<const double> y);

// Upper tail P[F(d1, d2) > f] through the regularized incomplete beta
// function; absolute accuracy ~1e-12 over the tested range.
double f_tail(double f, unsigned d1, unsigned d2);

// Regularized incomplete beta I_x(a, b) (exposed for the quadrature tests).
double reg_inc_beta(double a, double b, double x);

struct GrangerOptions {
  unsigned lag = 1;
  bool bic_lag = false;   // choose lag in [1, max_lag] by BIC of the full model
  unsigned max_lag = 5;
  double alpha = 0.05;
};

struct GrangerResult {
  std::string cause;
  std::string effect;
  unsigned lag = 1;
  double f_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_effective = 0;
  bool causal = false;
  bool degenerate = false;  // rank-deficient design; reported as F=0, p=1
};

// Nested-model F test: does lagged x improve the AR(q) prediction of y?
GrangerResult granger_test(std::span<const double> x, std::span<const double> y,
                           const GrangerOptions& opts = {});

enum class SeriesMode {
  representative,  // one player per class, the median-rank holder
  pooled           // all class members stacked with player intercepts
};

struct SeriesOptions {
  unsigned window_minutes = 15;  // pre-test mean-downsampling window
  SeriesMode mode = SeriesMode::representative;
};

struct CausalityCell {
  EnergyClass cls;
  GrangerResult result;
  std::string player;  // representative (empty in pooled mode)
};

struct CausalityTable {
  std::vector<EnergyClass> classes;
  std::vector<std::pair<std::string, std::string>> pairs;  // cause -> effect
  std::vector<CausalityCell> cells;                        // class-major order
  std::vector<std::string> notes;
};

// One Granger test per (class, directed pair). Per-cell failures become
// degenerate cells plus a note; the table is always produced.
CausalityTable causality_table(const Dataset& ds, const ClassAssignment& classes,
                               const std::vector<std::pair<std::string, std::string>>& pairs,
                               const GrangerOptions& granger,
                               const SeriesOptions& series = {});

// Mean-per-window series of one feature for a set of players (single element
// for the representative mode). Exposed for tests.
std::vector<double> downsampled_series(const Dataset& ds, const std::string& player,
                                       const std::string& feature,
                                       unsigned window_minutes);

}  // namespace glseg
