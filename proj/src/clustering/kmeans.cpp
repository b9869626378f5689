#include "glseg/clustering/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glseg/core/error.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

namespace {

// Points as contiguous rows; the feature matrix stores columns.
struct RowData {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

RowData transpose(const FeatureMatrix& fm) {
  RowData rd;
  rd.n = fm.n;
  rd.dim = fm.cols();
  rd.data.resize(rd.n * rd.dim);
  for (std::size_t j = 0; j < rd.dim; ++j) {
    const auto col = fm.col(j);
    for (std::size_t i = 0; i < rd.n; ++i) rd.data[i * rd.dim + j] = col[i];
  }
  return rd;
}

int nearest_center(const RowData& rd, std::size_t i, const Mat& centers,
                   double* dist_out = nullptr) {
  const auto& k = simd::active();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.rows; ++c) {
    const double d = k.sqdist(rd.row(i).data(), centers.row(c).data(), rd.dim);
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

Mat kmeanspp_init(const RowData& rd, std::size_t k, Rng& rng) {
  Mat centers(k, rd.dim);
  std::vector<double> d2(rd.n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(rd.n, false);

  std::size_t first = static_cast<std::size_t>(rng.below(rd.n));
  auto set_center = [&](std::size_t c, std::size_t point) {
    std::copy_n(rd.row(point).data(), rd.dim, centers.row(c).data());
    chosen[point] = true;
  };
  set_center(0, first);

  const auto& kt = simd::active();
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < rd.n; ++i) {
      const double d = kt.sqdist(rd.row(i).data(), centers.row(c - 1).data(), rd.dim);
      if (d < d2[i]) d2[i] = d;
      total += d2[i];
    }
    std::size_t pick = rd.n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < rd.n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    if (pick >= rd.n) {
      // All remaining mass is zero (duplicate points): first unchosen row.
      for (std::size_t i = 0; i < rd.n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
      if (pick >= rd.n) pick = 0;
    }
    set_center(c, pick);
  }
  return centers;
}

struct AssignResult {
  std::vector<int> labels;
  double distortion = 0.0;
};

AssignResult assign_all(const RowData& rd, const Mat& centers) {
  AssignResult res;
  res.labels.resize(rd.n);
  for (std::size_t i = 0; i < rd.n; ++i) {
    double d = 0.0;
    res.labels[i] = nearest_center(rd, i, centers, &d);
    res.distortion += d;
  }
  return res;
}

std::size_t lloyd(const RowData& rd, Mat& centers, std::size_t max_iter,
                  std::vector<std::size_t>& empties) {
  const std::size_t k = centers.rows;
  std::vector<int> labels(rd.n, -1);
  std::size_t iters = 0;
  for (; iters < max_iter; ++iters) {
    bool changed = false;
    for (std::size_t i = 0; i < rd.n; ++i) {
      const int c = nearest_center(rd, i, centers);
      if (c != labels[i]) {
        labels[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    Mat sums(k, rd.dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < rd.n; ++i) {
      simd::axpy(1.0, rd.row(i), sums.row(labels[i]));
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      const double inv = 1.0 / static_cast<double>(counts[c]);
      simd::affine(sums.row(c), inv, 0.0);
      std::copy_n(sums.row(c).data(), rd.dim, centers.row(c).data());
    }
  }
  // Final empties under the final assignment.
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < rd.n; ++i) ++counts[nearest_center(rd, i, centers)];
  empties.clear();
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) empties.push_back(c);
  }
  return iters;
}

std::size_t sculley_minibatch(const RowData& rd, Mat& centers, std::size_t batch,
                              std::size_t max_iter, Rng& rng) {
  const std::size_t k = centers.rows;
  std::vector<double> counts(k, 0.0);
  std::vector<std::size_t> idx(batch);
  std::vector<int> nearest(batch);
  std::size_t iters = 0;
  for (; iters < max_iter; ++iters) {
    for (std::size_t b = 0; b < batch; ++b) idx[b] = static_cast<std::size_t>(rng.below(rd.n));
    for (std::size_t b = 0; b < batch; ++b) nearest[b] = nearest_center(rd, idx[b], centers);
    // Committed in batch order: per-center learning rate 1/count.
    for (std::size_t b = 0; b < batch; ++b) {
      const int c = nearest[b];
      counts[c] += 1.0;
      const double eta = 1.0 / counts[c];
      auto center = centers.row(c);
      simd::affine(center, 1.0 - eta, 0.0);
      simd::axpy(eta, rd.row(idx[b]), center);
    }
  }
  return iters;
}

double point_mean_distance(const RowData& rd, std::size_t i,
                           const std::vector<std::size_t>& members, bool exclude_self) {
  const auto& k = simd::active();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j : members) {
    if (exclude_self && j == i) continue;
    total += std::sqrt(k.sqdist(rd.row(i).data(), rd.row(j).data(), rd.dim));
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

ClusterAssignment minibatch_kmeans(const FeatureMatrix& fm, std::size_t k,
                                   const KMeansOptions& opts, std::uint64_t seed) {
  if (fm.n == 0 || fm.cols() == 0) fail(ErrorCode::validation, "empty feature matrix");
  if (k < 1) fail(ErrorCode::validation, "k must be at least 1");
  if (k > fm.n) {
    fail(ErrorCode::validation, "k (" + std::to_string(k) + ") exceeds the number of rows (" +
                                    std::to_string(fm.n) + ")");
  }
  const RowData rd = transpose(fm);
  Rng rng(Rng::derive(seed, 0xA11CE));

  ClusterAssignment ca;
  ca.k = k;
  ca.seed = seed;
  ca.centers = kmeanspp_init(rd, k, rng);

  const std::size_t batch = std::min(opts.batch, rd.n);
  if (batch >= rd.n) {
    ca.iterations = lloyd(rd, ca.centers, opts.max_iter, ca.empty_clusters);
  } else {
    ca.iterations = sculley_minibatch(rd, ca.centers, batch, opts.max_iter, rng);
  }

  AssignResult assign = assign_all(rd, ca.centers);
  ca.labels = std::move(assign.labels);
  ca.distortion = assign.distortion;

  std::vector<std::size_t> counts(k, 0);
  for (int c : ca.labels) ++counts[static_cast<std::size_t>(c)];
  ca.empty_clusters.clear();
  std::size_t nonempty = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) ca.empty_clusters.push_back(c);
    else ++nonempty;
  }
  if (nonempty >= 2) {
    ca.silhouette =
        silhouette_score(fm, ca.labels, k, opts.silhouette_subsample, seed);
  }
  return ca;
}

ClusterAssignment kmeans_from_centers(const FeatureMatrix& fm, const Mat& centers,
                                      std::size_t max_iter, std::uint64_t seed) {
  if (centers.cols != fm.cols()) fail(ErrorCode::validation, "center dimension mismatch");
  const RowData rd = transpose(fm);
  ClusterAssignment ca;
  ca.k = centers.rows;
  ca.seed = seed;
  ca.centers = centers;
  ca.iterations = lloyd(rd, ca.centers, max_iter, ca.empty_clusters);
  AssignResult assign = assign_all(rd, ca.centers);
  ca.labels = std::move(assign.labels);
  ca.distortion = assign.distortion;
  return ca;
}

double silhouette_score(const FeatureMatrix& fm, const std::vector<int>& labels,
                        std::size_t k, std::size_t subsample_cap, std::uint64_t seed) {
  if (labels.size() != fm.n) fail(ErrorCode::validation, "labels/rows mismatch");
  std::vector<std::size_t> counts(k, 0);
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= k) {
      fail(ErrorCode::validation, "label out of range");
    }
    ++counts[static_cast<std::size_t>(c)];
  }
  std::size_t nonempty = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) ++nonempty;
  }
  if (nonempty < 2) {
    fail(ErrorCode::degenerate, "silhouette is undefined for a single cluster");
  }

  // Subsample rows when too many, keeping at least one per nonempty cluster.
  std::vector<std::size_t> rows(fm.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (fm.n > subsample_cap && subsample_cap > 0) {
    Rng rng(Rng::derive(seed, 0x51L));
    rng.shuffle(rows);
    rows.resize(subsample_cap);
    std::vector<bool> present(k, false);
    for (std::size_t i : rows) present[static_cast<std::size_t>(labels[i])] = true;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0 && !present[c]) {
        for (std::size_t i = 0; i < fm.n; ++i) {
          if (static_cast<std::size_t>(labels[i]) == c) {
            rows.push_back(i);
            break;
          }
        }
      }
    }
    std::sort(rows.begin(), rows.end());
  }

  const RowData rd = transpose(fm);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i : rows) members[static_cast<std::size_t>(labels[i])].push_back(i);

  double total = 0.0;
  for (std::size_t i : rows) {
    const std::size_t own = static_cast<std::size_t>(labels[i]);
    if (members[own].size() <= 1) {
      continue;  // singleton scores 0
    }
    const double a = point_mean_distance(rd, i, members[own], /*exclude_self=*/true);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own || members[c].empty()) continue;
      b = std::min(b, point_mean_distance(rd, i, members[c], /*exclude_self=*/false));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(rows.size());
}

namespace {

constexpr double kLowConfidenceRatio = 2.0;

void elbow_from_curve(ElbowResult& res) {
  res.suggested_k.reset();
  res.curvature_ratio = 0.0;
  res.low_confidence = false;
  const std::size_t m = res.ks.size();
  if (m < 3) return;  // suggestion withheld

  std::vector<double> dd(m, 0.0);
  std::size_t best_pos = 1;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    dd[i] = res.distortions[i - 1] - 2.0 * res.distortions[i] + res.distortions[i + 1];
    if (dd[i] > dd[best_pos]) best_pos = i;
  }
  res.suggested_k = res.ks[best_pos];
  // Confidence: at a real elbow the bend dominates the entire remaining
  // descent of the curve; a featureless curve keeps falling past it.
  const double tail_drop = res.distortions[best_pos] - res.distortions[m - 1];
  if (dd[best_pos] <= 0.0) {
    res.curvature_ratio = 0.0;
  } else if (tail_drop <= 0.0) {
    res.curvature_ratio = std::numeric_limits<double>::infinity();
  } else {
    res.curvature_ratio = dd[best_pos] / tail_drop;
  }
  res.low_confidence = !(res.curvature_ratio >= kLowConfidenceRatio);
}

}  // namespace

ElbowResult elbow_scan(const FeatureMatrix& fm, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed, const KMeansOptions& opts) {
  if (k_range.empty() || !std::is_sorted(k_range.begin(), k_range.end()) ||
      k_range.front() < 1) {
    fail(ErrorCode::validation, "k_range must be ascending and start at >= 1");
  }
  ElbowResult res;
  for (std::size_t k : k_range) {
    const ClusterAssignment ca = minibatch_kmeans(fm, k, opts, Rng::derive(seed, k));
    res.ks.push_back(k);
    res.distortions.push_back(ca.distortion);
  }
  elbow_from_curve(res);
  return res;
}

SelectKResult select_k(const FeatureMatrix& fm, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed, const KMeansOptions& opts) {
  if (k_range.empty() || !std::is_sorted(k_range.begin(), k_range.end()) ||
      k_range.front() < 1) {
    fail(ErrorCode::validation, "k_range must be ascending and start at >= 1");
  }
  SelectKResult res;
  for (std::size_t k : k_range) {
    ClusterAssignment ca = minibatch_kmeans(fm, k, opts, Rng::derive(seed, k));
    res.elbow.ks.push_back(k);
    res.elbow.distortions.push_back(ca.distortion);
    res.silhouettes.push_back(ca.silhouette);
    res.assignments.push_back(std::move(ca));
  }
  elbow_from_curve(res.elbow);

  // Silhouette is binding among k >= 2; ties go to the smaller k.
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t i = 0; i < res.elbow.ks.size(); ++i) {
    if (res.elbow.ks[i] < 2 || !res.silhouettes[i]) continue;
    if (*res.silhouettes[i] > best + 1e-12) {
      best = *res.silhouettes[i];
      best_k = res.elbow.ks[i];
    }
  }
  if (best_k == 0) {
    fail(ErrorCode::degenerate, "no k in range admits a silhouette score");
  }
  res.k = best_k;
  res.criteria_disagree = res.elbow.suggested_k && *res.elbow.suggested_k != res.k;
  return res;
}

}  // namespace glseg
