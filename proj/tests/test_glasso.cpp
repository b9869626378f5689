#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "glseg/core/error.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/dataset/dataset.hpp"
#include "glseg/dataset/synthetic.hpp"
#include "glseg/glasso/glasso.hpp"

using namespace glseg;

namespace {

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Lasso objective computed with plain loops, independent of the library's
// kernel path: (1/2n)||y - X beta||^2 + lambda ||beta||_1.
double lasso_objective(const FeatureMatrix& fm, std::size_t s,
                       const std::vector<double>& beta, double lambda) {
  const std::size_t n = fm.n;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    std::size_t jj = 0;
    for (std::size_t j = 0; j < fm.cols(); ++j) {
      if (j == s) continue;
      pred += beta[jj++] * fm.col(j)[i];
    }
    const double r = fm.col(s)[i] - pred;
    rss += r * r;
  }
  double l1 = 0.0;
  for (double b : beta) l1 += std::abs(b);
  return 0.5 * rss / static_cast<double>(n) + lambda * l1;
}

// Brute-force oracle: multi-scale grid search over the coefficient box,
// refined several rounds. Only used for p <= 2, which covers S <= 3.
double brute_force_lasso_objective(const FeatureMatrix& fm, std::size_t s,
                                   double lambda) {
  const std::size_t p = fm.cols() - 1;
  REQUIRE(p <= 2);
  std::vector<double> center(p, 0.0);
  double radius = 3.0;
  double best = lasso_objective(fm, s, center, lambda);
  std::vector<double> best_beta = center;
  const int steps = 20;
  for (int round = 0; round < 6; ++round) {
    std::vector<double> beta(p);
    if (p == 1) {
      for (int i = -steps; i <= steps; ++i) {
        beta[0] = center[0] + radius * i / steps;
        const double obj = lasso_objective(fm, s, beta, lambda);
        if (obj < best) {
          best = obj;
          best_beta = beta;
        }
      }
    } else {
      for (int i = -steps; i <= steps; ++i) {
        for (int j = -steps; j <= steps; ++j) {
          beta[0] = center[0] + radius * i / steps;
          beta[1] = center[1] + radius * j / steps;
          const double obj = lasso_objective(fm, s, beta, lambda);
          if (obj < best) {
            best = obj;
            best_beta = beta;
          }
        }
      }
    }
    center = best_beta;
    radius = radius * 2.0 / steps;  // zoom into the winning cell
  }
  return best;
}

FeatureMatrix random_standardized(Rng& rng, std::size_t n, std::size_t S,
                                  double correlation = 0.5) {
  std::vector<std::vector<double>> cols(S, std::vector<double>(n));
  std::vector<double> common(n);
  for (double& v : common) v = rng.normal();
  for (std::size_t j = 0; j < S; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      cols[j][i] = correlation * common[i] + (1.0 - correlation) * rng.normal();
    }
  }
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < S; ++j) labels.push_back("v" + std::to_string(j));
  return standardize_columns(labels, cols);
}

}  // namespace

TEST_CASE("soft threshold shrinks toward zero") {
  CHECK(soft_threshold(1.2, 0.5) == doctest::Approx(0.7));
  CHECK(soft_threshold(-0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-1.2, 0.5) == doctest::Approx(-0.7));
  for (double theta : {-2.0, -0.1, 0.0, 0.7, 3.5}) {
    CHECK(soft_threshold(theta, 0.0) == theta);
  }
  CHECK(soft_threshold(0.5, 0.5) == 0.0);
}

TEST_CASE("lambda path spans two decades in ten log steps") {
  // Perfectly correlated standardized columns: lambda_max is exactly 1.
  Rng rng(3);
  std::vector<double> base(200);
  for (double& v : base) v = rng.normal();
  const FeatureMatrix fm = standardize_columns({"a", "b"}, {base, base});
  const LambdaPath path = lambda_path(fm, 1);
  CHECK(close(path.lambda_max, 1.0, 1e-10));
  CHECK(close(path.grid[0], path.lambda_max, 1e-15));
  CHECK(close(path.grid[9], path.lambda_max / 100.0, 1e-12));
  for (int i = 0; i + 2 < 10; ++i) {
    const double r1 = path.grid[i] / path.grid[i + 1];
    const double r2 = path.grid[i + 1] / path.grid[i + 2];
    CHECK(close(r1, r2, 1e-10));
  }

  // A hypothetical lambda_max of 2 forces grid[9] = 0.02 (non-unit columns).
  FeatureMatrix scaled = fm;
  for (double& v : scaled.col(0)) v *= 2.0;
  const LambdaPath p2 = lambda_path(scaled, 1);
  CHECK(close(p2.lambda_max, 2.0, 1e-9));
  CHECK(close(p2.grid[9], 0.02, 1e-11));
}

TEST_CASE("lambda path on independent noise is near zero but defined") {
  Rng rng(11);
  const std::size_t n = 10000;
  std::vector<std::vector<double>> cols(2, std::vector<double>(n));
  for (auto& c : cols) {
    for (double& v : c) v = rng.normal();
  }
  const FeatureMatrix fm = standardize_columns({"a", "b"}, cols);
  const LambdaPath path = lambda_path(fm, 0);
  CHECK(path.lambda_max < 0.05);
  CHECK(path.lambda_max > 0.0);
}

TEST_CASE("degenerate path: orthogonal target") {
  const FeatureMatrix fm = standardize_columns(
      {"a", "b"}, {{1.0, -1.0, 1.0, -1.0}, {1.0, 1.0, -1.0, -1.0}});
  try {
    (void)lambda_path(fm, 0);
    FAIL("expected degenerate path error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate);
  }
}

TEST_CASE("lasso_cd at and above lambda_max returns exactly zero") {
  Rng rng(21);
  const FeatureMatrix fm = random_standardized(rng, 300, 4);
  for (std::size_t s = 0; s < 4; ++s) {
    const LambdaPath path = lambda_path(fm, s);
    for (double factor : {1.0, 1.0 + 1e-9, 1.5}) {
      const auto beta = lasso_cd(fm, s, path.lambda_max * factor);
      for (double b : beta) CHECK(b == 0.0);
    }
  }
}

TEST_CASE("lasso_cd at lambda=0 with one predictor reproduces the OLS slope") {
  Rng rng(5);
  const std::size_t n = 120;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = 0.6 * x[i] + 0.3 * rng.normal();
  }
  const FeatureMatrix fm = standardize_columns({"y", "x"}, {y, x});
  const auto beta = lasso_cd(fm, 0, 0.0);
  REQUIRE(beta.size() == 1);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += fm.col(1)[i] * fm.col(0)[i];
    den += fm.col(1)[i] * fm.col(1)[i];
  }
  CHECK(close(beta[0], num / den, 1e-8));
}

TEST_CASE("lasso_cd matches the brute-force oracle on small instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t S = 2 + rng.below(2);  // 2 or 3
    const std::size_t n = 10 + rng.below(41);
    const FeatureMatrix fm = random_standardized(rng, n, S, rng.uniform(0.0, 0.9));
    const std::size_t s = rng.below(S);
    const LambdaPath path = lambda_path(fm, s);
    const double lambda = path.grid[rng.below(10)];
    const auto beta = lasso_cd(fm, s, lambda);
    const double obj = lasso_objective(fm, s, beta, lambda);
    const double oracle = brute_force_lasso_objective(fm, s, lambda);
    CHECK(obj <= oracle + 1e-4);
    CHECK(obj >= oracle - 1e-4);
  }
}

TEST_CASE("penalized objective never increases across sweeps") {
  Rng rng(31);
  const FeatureMatrix fm = random_standardized(rng, 200, 6, 0.7);
  CdStats stats;
  stats.trace = true;
  LassoOptions opts;
  opts.tol = 1e-12;
  (void)lasso_cd(fm, 0, 0.01, opts, &stats);
  REQUIRE(stats.objective_per_sweep.size() >= 2);
  for (std::size_t i = 1; i < stats.objective_per_sweep.size(); ++i) {
    CHECK(stats.objective_per_sweep[i] <= stats.objective_per_sweep[i - 1] + 1e-15);
  }
}

TEST_CASE("monotone regularization along the path") {
  Rng rng(37);
  const FeatureMatrix fm = random_standardized(rng, 150, 5, 0.6);
  const LambdaPath path = lambda_path(fm, 2);
  double last_l1 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto beta = lasso_cd(fm, 2, path.grid[i]);
    double l1 = 0.0;
    for (double b : beta) l1 += std::abs(b);
    if (i > 0) CHECK(l1 >= last_l1 - 1e-8);
    last_l1 = l1;
  }
}

TEST_CASE("one sweep costs O(N) per coordinate, counted exactly") {
  Rng rng(41);
  const std::size_t n = 500;
  const std::size_t S = 8;
  const FeatureMatrix fm = random_standardized(rng, n, S, 0.5);
  CdStats stats;
  LassoOptions opts;
  opts.tol = 0.0;  // never converge: run exactly max_iter sweeps
  opts.max_iter = 7;
  (void)lasso_cd(fm, 0, 0.05, opts, &stats);
  const std::size_t p = S - 1;
  CHECK(stats.sweeps == opts.max_iter);
  CHECK(stats.coordinate_updates == opts.max_iter * p);
  // Setup: p column norms + 1 objective; per sweep: p dots, at most p axpys,
  // 1 objective evaluation. All on length-n vectors.
  const std::size_t bound = n * (p + 1 + opts.max_iter * (2 * p + 1));
  CHECK(stats.element_ops <= bound);
  CHECK(stats.element_ops >= n * opts.max_iter * p);  // the dots alone
}

TEST_CASE("hitting max_iter reports non-convergence instead of silent success") {
  Rng rng(43);
  const FeatureMatrix fm = random_standardized(rng, 200, 6, 0.8);
  CdStats stats;
  LassoOptions opts;
  opts.tol = 1e-15;
  opts.max_iter = 1;
  (void)lasso_cd(fm, 0, 1e-4, opts, &stats);
  CHECK(stats.sweeps == 1);
  CHECK(!stats.converged);
}

TEST_CASE("fit_graph collects per-vertex defects and keeps going") {
  // Column a is exactly orthogonal to b and c; b and c are identical.
  const std::vector<double> a = {1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  const std::vector<double> b = {1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0};
  const FeatureMatrix fm = standardize_columns({"a", "b", "c"}, {a, b, b});
  CvOptions opts;
  opts.folds = 2;
  const NeighborhoodGraph graph = fit_graph(fm, EdgeRule::Or, opts);
  REQUIRE(graph.defects.size() == 1);
  CHECK(graph.defects[0].find("a") != std::string::npos);
  CHECK(!graph.fits[0].has_value());
  REQUIRE(graph.fits[1].has_value());
  REQUIRE(graph.edges.size() == 1);
  CHECK(graph.edges[0] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("cv_select_lambda recovers a planted predictor") {
  Rng rng(53);
  const std::size_t n = 2000;
  std::vector<double> xj(n), other(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xj[i] = rng.normal();
    other[i] = rng.normal();
    ys[i] = 0.8 * xj[i] + 0.1 * rng.normal();
  }
  const FeatureMatrix fm = standardize_columns({"y", "xj", "noise"}, {ys, xj, other});
  CvOptions opts;
  opts.seed = 1;
  const NeighborhoodFit fit = cv_select_lambda(fm, 0, opts);
  CHECK(fit.converged);
  CHECK(std::find(fit.support.begin(), fit.support.end(), 1u) != fit.support.end());
  CHECK(fit.cv_loss < 0.1);
  CHECK(fit.noise_var < 0.1);
  CHECK(fit.cv_curve.size() == 10);
}

TEST_CASE("cv_select_lambda on pure noise keeps the support empty") {
  int empty = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(900 + seed);
    const std::size_t n = 2000;
    std::vector<std::vector<double>> cols(4, std::vector<double>(n));
    for (auto& c : cols) {
      for (double& v : c) v = rng.normal();
    }
    const FeatureMatrix fm = standardize_columns({"y", "a", "b", "c"}, cols);
    CvOptions opts;
    opts.seed = seed;
    const NeighborhoodFit fit = cv_select_lambda(fm, 0, opts);
    if (fit.support.empty()) ++empty;
  }
  CHECK(empty >= 9);
}

TEST_CASE("cv smoke: 2 folds on 4 rows still selects a grid lambda") {
  const FeatureMatrix fm = standardize_columns(
      {"y", "x"}, {{1.0, 2.0, 3.0, 4.0}, {1.1, 1.9, 3.2, 3.8}});
  CvOptions opts;
  opts.folds = 2;
  const NeighborhoodFit fit = cv_select_lambda(fm, 0, opts);
  const LambdaPath path = lambda_path(fm, 0);
  bool on_grid = false;
  for (double g : path.grid) {
    if (g == fit.lambda) on_grid = true;
  }
  CHECK(on_grid);
  CHECK_THROWS_AS((void)cv_select_lambda(fm, 0, CvOptions{.folds = 1}), Error);
  CHECK_THROWS_AS((void)cv_select_lambda(fm, 0, CvOptions{.folds = 5}), Error);
}

TEST_CASE("edge rules combine neighborhood supports as OR / AND") {
  // N(0) = {1}, N(1) = {} -> OR keeps (0,1), AND drops it.
  const std::vector<std::vector<std::size_t>> supports = {{1}, {}};
  const auto or_edges = combine_neighborhoods(supports, EdgeRule::Or, 2);
  const auto and_edges = combine_neighborhoods(supports, EdgeRule::And, 2);
  REQUIRE(or_edges.size() == 1);
  CHECK(or_edges[0] == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(and_edges.empty());

  // Random supports: AND edges are a subset of OR edges, all stored as i<j.
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t S = 2 + rng.below(6);
    std::vector<std::vector<std::size_t>> sup(S);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t j = 0; j < S; ++j) {
        if (j != s && rng.uniform() < 0.3) sup[s].push_back(j);
      }
    }
    const auto o = combine_neighborhoods(sup, EdgeRule::Or, S);
    const auto a = combine_neighborhoods(sup, EdgeRule::And, S);
    std::set<std::pair<std::size_t, std::size_t>> os(o.begin(), o.end());
    for (const auto& e : a) CHECK(os.count(e) == 1);
    for (const auto& e : o) CHECK(e.first < e.second);
  }
}

TEST_CASE("fit_graph recovers a planted chain") {
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SynthConfig cfg;
    cfg.n_features = 10;
    cfg.n_rows = 2000;
    cfg.k = 1;
    cfg.players = 4;
    cfg.edge_weight = 0.4;
    const SynthResult sr = generate_synthetic(cfg, seed);
    std::vector<std::string> feats;
    for (std::size_t j = 0; j < cfg.n_features; ++j) {
      feats.push_back("f" + std::to_string(j));
    }
    const FeatureMatrix fm = standardize(sr.dataset, feats);
    CvOptions opts;
    opts.seed = seed;
    const NeighborhoodGraph graph = fit_graph(fm, EdgeRule::Or, opts);
    CHECK(graph.defects.empty());

    std::set<std::pair<std::size_t, std::size_t>> truth(sr.truth.support.begin(),
                                                        sr.truth.support.end());
    std::size_t tp = 0;
    for (const auto& e : graph.edges) {
      if (truth.count(e)) ++tp;
    }
    const double precision =
        graph.edges.empty() ? 0.0 : static_cast<double>(tp) / graph.edges.size();
    const double recall = static_cast<double>(tp) / truth.size();
    if (precision >= 0.9 && recall >= 0.9) ++good;

    // Partial correlations: symmetric, unit diagonal, bounded.
    const Mat& pc = graph.partial_correlations;
    for (std::size_t i = 0; i < pc.rows; ++i) {
      CHECK(pc.at(i, i) == 1.0);
      for (std::size_t j = 0; j < pc.cols; ++j) {
        CHECK(pc.at(i, j) == pc.at(j, i));
        CHECK(std::abs(pc.at(i, j)) <= 1.0);
      }
    }
  }
  CHECK(good >= 2);
}

TEST_CASE("fit_graph under the AND rule is stricter but still recovers the chain") {
  SynthConfig cfg;
  cfg.n_features = 10;
  cfg.n_rows = 2000;
  cfg.k = 1;
  cfg.players = 4;
  cfg.edge_weight = 0.4;
  const SynthResult sr = generate_synthetic(cfg, 5);
  std::vector<std::string> feats;
  for (std::size_t j = 0; j < cfg.n_features; ++j) feats.push_back("f" + std::to_string(j));
  const FeatureMatrix fm = standardize(sr.dataset, feats);
  CvOptions opts;
  opts.seed = 5;
  const NeighborhoodGraph and_graph = fit_graph(fm, EdgeRule::And, opts);
  const NeighborhoodGraph or_graph = fit_graph(fm, EdgeRule::Or, opts);

  std::set<std::pair<std::size_t, std::size_t>> or_edges(or_graph.edges.begin(),
                                                         or_graph.edges.end());
  for (const auto& e : and_graph.edges) CHECK(or_edges.count(e) == 1);

  std::set<std::pair<std::size_t, std::size_t>> truth(sr.truth.support.begin(),
                                                      sr.truth.support.end());
  std::size_t tp = 0;
  for (const auto& e : and_graph.edges) {
    if (truth.count(e)) ++tp;
  }
  CHECK(static_cast<double>(tp) / truth.size() >= 0.8);                    // recall
  CHECK(static_cast<double>(tp) / and_graph.edges.size() >= 0.9);          // precision
}

TEST_CASE("fit_graph on two uncorrelated columns stays empty") {
  int empty = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(1700 + seed);
    std::vector<std::vector<double>> cols(2, std::vector<double>(1000));
    for (auto& c : cols) {
      for (double& v : c) v = rng.normal();
    }
    const FeatureMatrix fm = standardize_columns({"a", "b"}, cols);
    CvOptions opts;
    opts.seed = seed;
    const NeighborhoodGraph graph = fit_graph(fm, EdgeRule::Or, opts);
    if (graph.edges.empty()) ++empty;
  }
  CHECK(empty >= 9);
}

TEST_CASE("pearson matrix on exact and anti-correlated columns") {
  Rng rng(61);
  std::vector<double> a(50);
  for (double& v : a) v = rng.normal();
  std::vector<double> b = a;
  std::vector<double> c(50);
  for (std::size_t i = 0; i < 50; ++i) c[i] = -a[i];
  const FeatureMatrix fm = standardize_columns({"a", "b", "c"}, {a, b, c});
  const CorrelationMatrix m = pearson_matrix(fm);
  CHECK(close(m.values.at(0, 1), 1.0, 1e-12));
  CHECK(close(m.values.at(0, 2), -1.0, 1e-12));
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.values.at(i, i) == 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(m.values.at(i, j) == m.values.at(j, i));
      CHECK(std::abs(m.values.at(i, j)) <= 1.0);
    }
  }
}

TEST_CASE("pearson matrix off-diagonals vanish for independent noise") {
  Rng rng(67);
  const std::size_t n = 10000;
  std::vector<std::vector<double>> cols(3, std::vector<double>(n));
  for (auto& c : cols) {
    for (double& v : c) v = rng.normal();
  }
  const FeatureMatrix fm = standardize_columns({"a", "b", "c"}, cols);
  const CorrelationMatrix m = pearson_matrix(fm);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      CHECK(std::abs(m.values.at(i, j)) < 0.05);
    }
  }
}
