#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "glseg/core/linalg.hpp"
#include "glseg/dataset/dataset.hpp"

namespace glseg {

struct SynthChannel {
  std::string cause;
  std::string effect;
  double coeff = 0.0;  // b in effect_t = ar*effect_{t-1} + b*cause_{t-1} + noise
};

struct SynthConfig {
  std::size_t n_features = 10;   // S (feature columns f0..f{S-1})
  std::size_t n_rows = 2000;     // N, total across players
  std::size_t k = 1;             // planted clusters
  std::size_t players = 6;
  std::string support = "chain";  // chain | grid | random
  double random_p = 0.1;          // edge probability for support=random
  double edge_weight = 0.4;       // |partial correlation| on planted edges
  double separation = 6.0;        // distance between adjacent cluster means
  double ar_coeff = 0.5;
  double noise_sd = 1.0;
  std::vector<SynthChannel> channels;
  std::uint64_t seed = 1;

  static SynthConfig from_file(const std::string& path);
  static SynthConfig from_keyval(const class KeyVal& kv);
};

struct GroundTruth {
  std::vector<std::pair<std::size_t, std::size_t>> support;  // undirected, i<j
  std::vector<int> row_cluster;                  // planted cluster per row
  std::vector<SynthChannel> channels;            // only channels with b != 0
  std::map<std::string, int> player_cluster;
  std::vector<Mat> precision;                    // per-cluster precision matrix
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

// Deterministic for fixed (cfg, seed): per-player substreams are derived from
// the seed, so the output is reproducible bit for bit.
SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

void write_ground_truth_json(const GroundTruth& truth, const std::string& path);

}  // namespace glseg
