#pragma once

#include <array>
#include <string>
#include <vector>

#include "glseg/glasso/glasso.hpp"
#include "glseg/supervised/classes.hpp"

namespace glseg {

enum class SimilarityMetric { pearson, rv };
const char* similarity_metric_name(SimilarityMetric m);

// Pearson correlation of the strict upper triangles (diagonals excluded).
// Throws Error(degenerate) when either triangle is constant.
double matrix_pearson(const CorrelationMatrix& a, const CorrelationMatrix& b);

// RV(a, b) = tr(a b) / sqrt(tr(a a) tr(b b)); 1 for proportional inputs.
// Throws Error(degenerate) on a zero matrix.
double rv_coefficient(const CorrelationMatrix& a, const CorrelationMatrix& b);

struct SimilarityMatrix {
  std::array<std::array<double, 3>, 3> values{};  // rows: classes, cols: clusters
  SimilarityMetric metric = SimilarityMetric::rv;
  std::array<std::string, 3> row_labels;
  std::array<std::string, 3> col_labels;
};

struct LabelMapping {
  std::array<EnergyClass, 3> cluster_class{};  // per cluster column
  std::array<double, 3> scores{};
  SimilarityMetric metric = SimilarityMetric::rv;
  bool conflict = false;  // column argmaxes were not a bijection
};

struct TransferResult {
  SimilarityMatrix pearson;
  SimilarityMatrix rv;
  LabelMapping mapping;          // under the binding metric
  LabelMapping secondary;        // under the other metric
  bool metrics_disagree = false;
};

// Matches the three cluster correlation matrices to the three class matrices
// by column argmax of the similarity matrix. "points"/"rank" rows and
// columns are removed before comparison. A non-bijective argmax falls back
// to the best of the six permutations and is flagged.
TransferResult transfer_labels(const std::array<CorrelationMatrix, 3>& sup_mats,
                               const std::array<CorrelationMatrix, 3>& unsup_mats,
                               SimilarityMetric binding = SimilarityMetric::rv);

}  // namespace glseg
