#include "glseg/similarity/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glseg/core/error.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

const char* similarity_metric_name(SimilarityMetric m) {
  return m == SimilarityMetric::pearson ? "pearson" : "rv";
}

namespace {

void check_conformable(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  if (a.values.rows != b.values.rows || a.labels != b.labels) {
    fail(ErrorCode::validation,
         "similarity inputs must share dimensions and label order");
  }
}

std::vector<double> upper_triangle(const CorrelationMatrix& m) {
  std::vector<double> v;
  const std::size_t S = m.values.rows;
  v.reserve(S * (S - 1) / 2);
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = i + 1; j < S; ++j) v.push_back(m.values.at(i, j));
  }
  return v;
}

// Drop named rows/columns (used for "points"/"rank" before comparison).
CorrelationMatrix drop_labels(const CorrelationMatrix& m,
                              const std::vector<std::string>& names) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (std::find(names.begin(), names.end(), m.labels[i]) == names.end()) {
      keep.push_back(i);
    }
  }
  if (keep.size() == m.labels.size()) return m;
  CorrelationMatrix out;
  out.kind = m.kind;
  out.values = Mat(keep.size(), keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    out.labels.push_back(m.labels[keep[a]]);
    for (std::size_t b = 0; b < keep.size(); ++b) {
      out.values.at(a, b) = m.values.at(keep[a], keep[b]);
    }
  }
  return out;
}

}  // namespace

double matrix_pearson(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  check_conformable(a, b);
  if (a.values.rows < 2) {
    fail(ErrorCode::degenerate, "matrix_pearson needs at least a 2x2 matrix");
  }
  std::vector<double> va = upper_triangle(a);
  std::vector<double> vb = upper_triangle(b);
  const double n = static_cast<double>(va.size());
  const auto& k = simd::active();
  const double ma = k.sum(va.data(), va.size()) / n;
  const double mb = k.sum(vb.data(), vb.size()) / n;
  simd::affine(va, 1.0, -ma);
  simd::affine(vb, 1.0, -mb);
  const double sa = std::sqrt(k.sumsq(va.data(), va.size()));
  const double sb = std::sqrt(k.sumsq(vb.data(), vb.size()));
  if (sa <= 0.0 || sb <= 0.0) {
    fail(ErrorCode::degenerate,
         "matrix_pearson undefined: constant off-diagonal entries");
  }
  return std::clamp(k.dot(va.data(), vb.data(), va.size()) / (sa * sb), -1.0, 1.0);
}

double rv_coefficient(const CorrelationMatrix& a, const CorrelationMatrix& b) {
  check_conformable(a, b);
  const double taa = frobenius_inner(a.values, a.values);
  const double tbb = frobenius_inner(b.values, b.values);
  if (taa <= 0.0 || tbb <= 0.0) {
    fail(ErrorCode::degenerate, "rv_coefficient undefined for a zero matrix");
  }
  return frobenius_inner(a.values, b.values) / std::sqrt(taa * tbb);
}

TransferResult transfer_labels(const std::array<CorrelationMatrix, 3>& sup_mats,
                               const std::array<CorrelationMatrix, 3>& unsup_mats,
                               SimilarityMetric binding) {
  const std::vector<std::string> removed = {"points", "rank"};
  std::array<CorrelationMatrix, 3> sup, unsup;
  for (int i = 0; i < 3; ++i) {
    sup[i] = drop_labels(sup_mats[i], removed);
    unsup[i] = drop_labels(unsup_mats[i], removed);
  }
  for (int i = 0; i < 3; ++i) {
    if (unsup[i].labels != sup[0].labels || sup[i].labels != sup[0].labels) {
      fail(ErrorCode::validation,
           "transfer_labels: all six matrices must share the feature set and order");
    }
  }

  TransferResult out;
  const std::array<EnergyClass, 3> class_order = {EnergyClass::High, EnergyClass::Medium,
                                                  EnergyClass::Low};
  for (SimilarityMetric metric : {SimilarityMetric::pearson, SimilarityMetric::rv}) {
    SimilarityMatrix& sm = metric == SimilarityMetric::pearson ? out.pearson : out.rv;
    sm.metric = metric;
    for (int r = 0; r < 3; ++r) {
      sm.row_labels[r] = energy_class_name(class_order[r]);
    }
    for (int c = 0; c < 3; ++c) {
      sm.col_labels[c] = "cluster_" + std::to_string(c + 1);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        sm.values[r][c] = metric == SimilarityMetric::pearson
                              ? matrix_pearson(sup[r], unsup[c])
                              : rv_coefficient(sup[r], unsup[c]);
      }
    }
  }

  auto map_from = [&](const SimilarityMatrix& sm) {
    // Degenerate when every entry agrees to within 1e-12.
    double lo = sm.values[0][0], hi = sm.values[0][0];
    for (const auto& row : sm.values) {
      for (double v : row) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi - lo < 1e-12) {
      fail(ErrorCode::degenerate, "similarity matrix is constant; mapping undefined");
    }

    LabelMapping mapping;
    mapping.metric = sm.metric;
    std::array<int, 3> argmax{};
    for (int c = 0; c < 3; ++c) {
      int best = 0;
      for (int r = 1; r < 3; ++r) {
        if (sm.values[r][c] > sm.values[best][c]) best = r;
      }
      argmax[c] = best;
      mapping.scores[c] = sm.values[best][c];
    }
    const bool bijection = argmax[0] != argmax[1] && argmax[0] != argmax[2] &&
                           argmax[1] != argmax[2];
    if (!bijection) {
      // Best assignment over all 3! permutations of classes to clusters.
      std::array<int, 3> perm = {0, 1, 2};
      std::array<int, 3> best_perm = perm;
      double best_total = -std::numeric_limits<double>::infinity();
      std::sort(perm.begin(), perm.end());
      do {
        const double total =
            sm.values[perm[0]][0] + sm.values[perm[1]][1] + sm.values[perm[2]][2];
        if (total > best_total) {
          best_total = total;
          best_perm = perm;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      argmax = best_perm;
      for (int c = 0; c < 3; ++c) mapping.scores[c] = sm.values[argmax[c]][c];
      mapping.conflict = true;
    }
    for (int c = 0; c < 3; ++c) {
      mapping.cluster_class[c] = class_order[static_cast<std::size_t>(argmax[c])];
    }
    return mapping;
  };

  out.mapping = map_from(binding == SimilarityMetric::pearson ? out.pearson : out.rv);
  out.secondary = map_from(binding == SimilarityMetric::pearson ? out.rv : out.pearson);
  out.metrics_disagree = out.mapping.cluster_class != out.secondary.cluster_class;
  return out;
}

}  // namespace glseg
