#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glseg/core/linalg.hpp"
#include "glseg/dataset/dataset.hpp"

namespace glseg {

// Lasso shrinkage operator: sign(theta) * max(|theta| - lambda, 0).
inline double soft_threshold(double theta, double lambda) {
  const double mag = std::abs(theta) - lambda;
  if (mag <= 0.0) return 0.0;
  return theta < 0.0 ? -mag : mag;
}

// Descending log-spaced penalty grid from lambda_max down to lambda_max/100.
struct LambdaPath {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  std::array<double, 10> grid{};
};

// lambda_max = (1/N) max_j |<Y_j, Y_s>|. Throws Error(degenerate) when the
// target column is orthogonal to every other column.
LambdaPath lambda_path(const FeatureMatrix& fm, std::size_t s);

struct LassoOptions {
  // Relative penalized-objective change per sweep; 0 disables the stop and
  // runs exactly max_iter sweeps.
  double tol = 1e-6;
  std::size_t max_iter = 1000;  // full sweeps
};

// Work counters for the complexity tests: one coordinate update costs O(N)
// through the partial-residual trick, and element_ops counts exactly the
// vector-kernel element touches.
struct CdStats {
  std::size_t sweeps = 0;
  std::size_t coordinate_updates = 0;
  std::size_t element_ops = 0;
  bool converged = false;
  std::vector<double> objective_per_sweep;  // filled when trace is requested
  bool trace = false;
};

// Coordinate-descent lasso for vertex s against all other columns.
// Minimizes (1/2N)||Y_s - Y_{V\s} beta||^2 + lambda ||beta||_1. The returned
// vector indexes V\{s} in ascending vertex order. `warm` (same shape) seeds
// the solve when given.
std::vector<double> lasso_cd(const FeatureMatrix& fm, std::size_t s, double lambda,
                             const LassoOptions& opts = {}, CdStats* stats = nullptr,
                             const std::vector<double>* warm = nullptr);

struct NeighborhoodFit {
  std::size_t vertex = 0;
  std::vector<double> beta;            // over V\{vertex}
  double lambda = 0.0;
  std::vector<std::size_t> support;    // vertex ids with beta != 0
  double cv_loss = 0.0;                // mean held-out squared error at lambda
  double noise_var = 0.0;              // (1/N)||residual||^2 at the final fit
  bool converged = true;
  std::vector<double> cv_curve;        // mean CV loss per grid lambda
  std::vector<double> cv_se;           // standard error of the fold means
};

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;   // fold shuffle; per-vertex streams derived from it
  bool one_se_rule = true;  // largest lambda within one SE of the CV minimum
  LassoOptions lasso;
};

// Line search over the path with K-fold cross-validation. By default the
// winner is the largest lambda whose mean CV loss is within one standard
// error of the minimum (exact ties also prefer the larger lambda); with
// one_se_rule=false the raw minimum wins. Refits on the full data.
NeighborhoodFit cv_select_lambda(const FeatureMatrix& fm, std::size_t s,
                                 const CvOptions& opts = {});

enum class EdgeRule { Or, And };

// Edge set from per-vertex neighborhood supports: OR keeps (i,j) when either
// regression selects the other vertex, AND when both do.
std::vector<std::pair<std::size_t, std::size_t>> combine_neighborhoods(
    const std::vector<std::vector<std::size_t>>& supports, EdgeRule rule,
    std::size_t n_vertices);

struct NeighborhoodGraph {
  std::vector<std::string> labels;
  EdgeRule rule = EdgeRule::Or;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j
  std::vector<std::optional<NeighborhoodFit>> fits;        // per vertex
  Mat partial_correlations;                                // S x S, unit diagonal
  std::vector<std::string> defects;                        // per-vertex failures
};

// Runs cv_select_lambda for every vertex and combines the supports. Vertex
// failures are collected in `defects`; the graph is still returned over the
// vertices that succeeded.
NeighborhoodGraph fit_graph(const FeatureMatrix& fm, EdgeRule rule,
                            const CvOptions& opts = {});

struct CorrelationMatrix {
  enum class Kind { pearson, partial };
  Mat values;
  std::vector<std::string> labels;
  Kind kind = Kind::pearson;
};

// Plain Pearson correlation matrix of the columns. Throws Error(degenerate)
// on a constant column.
CorrelationMatrix pearson_matrix(const FeatureMatrix& fm);

CorrelationMatrix partial_correlation_matrix(const NeighborhoodGraph& graph);

}  // namespace glseg
