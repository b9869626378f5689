#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "glseg/core/linalg.hpp"
#include "glseg/dataset/dataset.hpp"

namespace glseg {

struct KMeansOptions {
  std::size_t batch = 1024;        // clamped to N; batch >= N runs full Lloyd
  std::size_t max_iter = 100;
  std::size_t silhouette_subsample = 20000;
};

struct ClusterAssignment {
  std::size_t k = 0;
  Mat centers;                      // k x S
  std::vector<int> labels;          // per matrix row
  double distortion = 0.0;          // sum of squared distances to own center
  std::optional<double> silhouette; // absent for a single (nonempty) cluster
  std::uint64_t seed = 0;
  std::vector<std::size_t> empty_clusters;
  std::size_t iterations = 0;
};

// Distance-weighted probabilistic seeding, then minibatch updates with
// per-center counts (or exact Lloyd iterations when the batch covers all
// rows). Deterministic for a fixed seed; nearest-center ties go to the
// lowest center index.
ClusterAssignment minibatch_kmeans(const FeatureMatrix& fm, std::size_t k,
                                   const KMeansOptions& opts, std::uint64_t seed);

// Full-batch Lloyd from explicit initial centers (oracle tests).
ClusterAssignment kmeans_from_centers(const FeatureMatrix& fm, const Mat& centers,
                                      std::size_t max_iter, std::uint64_t seed);

// Mean silhouette over points, (b-a)/max(a,b); singletons and all-zero
// distances score 0. Computed on a seeded subsample when N exceeds the cap.
double silhouette_score(const FeatureMatrix& fm, const std::vector<int>& labels,
                        std::size_t k, std::size_t subsample_cap = 20000,
                        std::uint64_t seed = 0);

struct ElbowResult {
  std::vector<std::size_t> ks;
  std::vector<double> distortions;
  std::optional<std::size_t> suggested_k;  // withheld when |ks| < 3
  double curvature_ratio = 0.0;
  bool low_confidence = false;
};

ElbowResult elbow_scan(const FeatureMatrix& fm, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed, const KMeansOptions& opts = {});

struct SelectKResult {
  std::size_t k = 0;
  std::vector<std::optional<double>> silhouettes;  // aligned with elbow.ks
  ElbowResult elbow;
  bool criteria_disagree = false;
  std::vector<ClusterAssignment> assignments;      // aligned with elbow.ks
};

// Silhouette is binding; the elbow suggestion is advisory and disagreement is
// flagged. Ties prefer the smaller k.
SelectKResult select_k(const FeatureMatrix& fm, const std::vector<std::size_t>& k_range,
                       std::uint64_t seed, const KMeansOptions& opts = {});

}  // namespace glseg
