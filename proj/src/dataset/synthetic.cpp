#include "glseg/dataset/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "glseg/core/error.hpp"
#include "glseg/core/keyval.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/core/time.hpp"

namespace glseg {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<SynthChannel> parse_channels(const std::string& text) {
  std::vector<SynthChannel> out;
  for (const std::string& item : split_list(text)) {
    const std::size_t gt = item.find('>');
    const std::size_t colon = item.find(':', gt == std::string::npos ? 0 : gt);
    if (gt == std::string::npos || colon == std::string::npos) {
      fail(ErrorCode::config, "channel must look like 'x>y:b': " + item);
    }
    SynthChannel ch;
    ch.cause = trim(item.substr(0, gt));
    ch.effect = trim(item.substr(gt + 1, colon - gt - 1));
    try {
      ch.coeff = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      fail(ErrorCode::config, "channel coefficient is not a number: " + item);
    }
    out.push_back(std::move(ch));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> build_support(const SynthConfig& cfg,
                                                               std::uint64_t seed) {
  const std::size_t S = cfg.n_features;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  if (cfg.support == "chain") {
    for (std::size_t i = 0; i + 1 < S; ++i) edges.emplace_back(i, i + 1);
  } else if (cfg.support == "grid") {
    const std::size_t w = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(S))));
    for (std::size_t i = 0; i < S; ++i) {
      if ((i + 1) % w != 0 && i + 1 < S) edges.emplace_back(i, i + 1);
      if (i + w < S) edges.emplace_back(i, i + w);
    }
  } else if (cfg.support == "random") {
    Rng rng(Rng::derive(seed, 0xED6E5));
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t j = i + 1; j < S; ++j) {
        if (rng.uniform() < cfg.random_p) edges.emplace_back(i, j);
      }
    }
  } else {
    fail(ErrorCode::config, "unknown support pattern: " + cfg.support +
                                " (expected chain|grid|random)");
  }
  return edges;
}

// Per-cluster sign flip so clusters share a support but differ in correlation
// structure. D Theta D is a similarity transform, so definiteness carries over.
bool flip_sign(std::size_t coord, std::size_t cluster) {
  switch (cluster) {
    case 0: return false;
    case 1: return coord % 2 == 1;
    case 2: return coord % 3 == 0;
    default: return (coord * (cluster + 1)) % 5 < 2;
  }
}

}  // namespace

SynthConfig SynthConfig::from_keyval(const KeyVal& kv) {
  SynthConfig cfg;
  cfg.n_features = static_cast<std::size_t>(kv.get_int("S", 10));
  cfg.n_rows = static_cast<std::size_t>(kv.get_int("N", 2000));
  cfg.k = static_cast<std::size_t>(kv.get_int("k", 1));
  cfg.players = static_cast<std::size_t>(kv.get_int("players", 6));
  cfg.random_p = 0.1;
  std::string support = kv.get_or("support", "chain");
  // accept random(p) spelling
  if (support.rfind("random(", 0) == 0 && support.back() == ')') {
    try {
      cfg.random_p = std::stod(support.substr(7, support.size() - 8));
    } catch (const std::exception&) {
      fail(ErrorCode::config, "bad probability in support spec: " + support);
    }
    support = "random";
  }
  cfg.support = support;
  cfg.random_p = kv.get_double("p", cfg.random_p);
  cfg.edge_weight = kv.get_double("rho", 0.4);
  cfg.separation = kv.get_double("sep", 6.0);
  cfg.ar_coeff = kv.get_double("ar", 0.5);
  cfg.noise_sd = kv.get_double("noise", 1.0);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
  if (kv.has("channels")) cfg.channels = parse_channels(*kv.get("channels"));
  if (cfg.n_features < 2) fail(ErrorCode::config, "synthetic S must be >= 2");
  if (cfg.k < 1) fail(ErrorCode::config, "synthetic k must be >= 1");
  if (cfg.k > cfg.n_features) {
    fail(ErrorCode::config, "synthetic k must not exceed S");
  }
  if (cfg.players < cfg.k) {
    fail(ErrorCode::config, "synthetic players must be >= k");
  }
  return cfg;
}

SynthConfig SynthConfig::from_file(const std::string& path) {
  return from_keyval(KeyVal::from_file(path));
}

SynthResult generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  const std::size_t S = cfg.n_features;
  const std::size_t m = cfg.players;

  SynthResult out;
  GroundTruth& truth = out.truth;
  truth.support = build_support(cfg, seed);
  for (const SynthChannel& ch : cfg.channels) {
    if (ch.coeff != 0.0) truth.channels.push_back(ch);
  }

  // Per-cluster precision matrices and their Cholesky factors.
  std::vector<Mat> chol;
  for (std::size_t g = 0; g < cfg.k; ++g) {
    Mat theta = Mat::identity(S);
    for (const auto& [i, j] : truth.support) {
      double v = -cfg.edge_weight;
      if (flip_sign(i, g) != flip_sign(j, g)) v = -v;
      theta.at(i, j) = v;
      theta.at(j, i) = v;
    }
    try {
      chol.push_back(cholesky(theta));
    } catch (const Error&) {
      fail(ErrorCode::numeric,
           "requested precision matrix is not positive definite (support=" +
               cfg.support + ", rho=" + std::to_string(cfg.edge_weight) + ")");
    }
    truth.precision.push_back(std::move(theta));
  }

  // Cluster means: cluster g owns the coordinates j with j % k == g, so the
  // between-cluster offset survives per-column standardization downstream.
  std::vector<std::vector<double>> means(cfg.k, std::vector<double>(S, 0.0));
  if (cfg.k > 1) {
    for (std::size_t g = 0; g < cfg.k; ++g) {
      for (std::size_t j = 0; j < S; ++j) {
        if (j % cfg.k == g) means[g][j] = cfg.separation;
      }
    }
  }

  // Resolve channel feature indices.
  std::vector<std::string> feat_names;
  for (std::size_t j = 0; j < S; ++j) feat_names.push_back("f" + std::to_string(j));
  auto feat_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < S; ++j) {
      if (feat_names[j] == name) return j;
    }
    fail(ErrorCode::config, "channel references unknown feature: " + name);
  };
  struct ResolvedChannel {
    std::size_t cause, effect;
    double coeff;
  };
  std::vector<ResolvedChannel> channels;
  for (const SynthChannel& ch : cfg.channels) {
    if (ch.coeff != 0.0) channels.push_back({feat_of(ch.cause), feat_of(ch.effect), ch.coeff});
  }

  Dataset& ds = out.dataset;
  ds.feature_names = feat_names;
  ds.feature_names.push_back("points");
  ds.feature_names.push_back("rank");

  const int id_width = static_cast<int>(std::to_string(m - 1).size());
  const std::int64_t epoch = to_minutes({2017, 9, 12, 0, 0});

  std::vector<double> z(S), x(S), prev(S);
  for (std::size_t p = 0; p < m; ++p) {
    const std::size_t rows_p = cfg.n_rows / m + (p < cfg.n_rows % m ? 1 : 0);
    const std::size_t g = p * cfg.k / m;
    const int rank = static_cast<int>(p) + 1;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "p%0*d", id_width, static_cast<int>(p));
    const std::string pid = idbuf;

    Rng rng(Rng::derive(seed, 1000 + p));
    for (std::size_t t = 0; t < rows_p; ++t) {
      for (std::size_t j = 0; j < S; ++j) z[j] = rng.normal();
      // x ~ N(0, Theta^{-1}): solve L^T x = z.
      x = solve_upper_from_lower(chol[g], z);
      for (const ResolvedChannel& ch : channels) {
        if (t == 0) continue;  // first row keeps the Gaussian draw
        x[ch.effect] = cfg.ar_coeff * prev[ch.effect] + ch.coeff * prev[ch.cause] +
                       cfg.noise_sd * rng.normal();
      }
      prev = x;

      ds.timestamps.push_back(epoch + static_cast<std::int64_t>(t));
      ds.player_ids.push_back(pid);
      ds.ranks.push_back(rank);
      ds.row_missing.push_back(0);
      for (std::size_t j = 0; j < S; ++j) {
        ds.values.push_back(x[j] + means[g][j]);
      }
      ds.values.push_back(static_cast<double>(m - p) + 0.1 * rng.normal());  // points
      ds.values.push_back(static_cast<double>(rank));
      truth.row_cluster.push_back(static_cast<int>(g));
    }
    truth.player_cluster[pid] = static_cast<int>(g);
  }
  ds.values.shrink_to_fit();
  return out;
}

void write_ground_truth_json(const GroundTruth& truth, const std::string& path) {
  ordered_json j;
  j["support"] = ordered_json::array();
  for (const auto& [a, b] : truth.support) j["support"].push_back({a, b});
  j["channels"] = ordered_json::array();
  for (const SynthChannel& ch : truth.channels) {
    j["channels"].push_back({{"cause", ch.cause}, {"effect", ch.effect}, {"coeff", ch.coeff}});
  }
  j["player_cluster"] = truth.player_cluster;
  j["row_cluster"] = truth.row_cluster;
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write ground truth: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace glseg
