#include "glseg/glasso/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "glseg/core/error.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

namespace {

struct Counters {
  CdStats* stats;
  std::size_t n;

  void kernel_call() const {
    if (stats) stats->element_ops += n;
  }
};

double l1_norm(const std::vector<double>& beta) {
  double s = 0.0;
  for (double b : beta) s += std::abs(b);
  return s;
}

// Gauss-Seidel coordinate descent on
//   (1/2n)||y - X beta||^2 + lambda ||beta||_1
// with a running residual, so each coordinate visit costs O(n). Column
// self-products are taken as given, which keeps the update exact on fold
// subsets whose columns are no longer unit-norm.
void cd_solve(std::span<const double> y,
              const std::vector<std::span<const double>>& X, double lambda,
              const LassoOptions& opts, std::vector<double>& beta,
              std::vector<double>& residual, CdStats* stats) {
  const std::size_t n = y.size();
  const std::size_t p = X.size();
  const auto& k = simd::active();
  Counters ops{stats, n};

  std::vector<double> cnorm(p);
  for (std::size_t j = 0; j < p; ++j) {
    cnorm[j] = k.sumsq(X[j].data(), n) / static_cast<double>(n);
    ops.kernel_call();
  }

  residual.assign(y.begin(), y.end());
  for (std::size_t j = 0; j < p; ++j) {
    if (beta[j] != 0.0) {
      k.axpy(-beta[j], X[j].data(), residual.data(), n);
      ops.kernel_call();
    }
  }

  double obj_prev = 0.5 * k.sumsq(residual.data(), n) / static_cast<double>(n) +
                    lambda * l1_norm(beta);
  ops.kernel_call();

  if (stats) stats->converged = false;
  for (std::size_t sweep = 0; sweep < opts.max_iter; ++sweep) {
    for (std::size_t j = 0; j < p; ++j) {
      if (stats) ++stats->coordinate_updates;
      if (cnorm[j] <= 0.0) continue;  // empty column: coefficient stays zero
      const double theta =
          k.dot(residual.data(), X[j].data(), n) / static_cast<double>(n) +
          beta[j] * cnorm[j];
      ops.kernel_call();
      const double b_new = soft_threshold(theta, lambda) / cnorm[j];
      if (b_new != beta[j]) {
        k.axpy(beta[j] - b_new, X[j].data(), residual.data(), n);
        ops.kernel_call();
        beta[j] = b_new;
      }
    }
    const double obj = 0.5 * k.sumsq(residual.data(), n) / static_cast<double>(n) +
                       lambda * l1_norm(beta);
    ops.kernel_call();
    if (stats) {
      ++stats->sweeps;
      if (stats->trace) stats->objective_per_sweep.push_back(obj);
    }
    const double delta = obj_prev - obj;
    obj_prev = obj;
    // tol == 0 disables the stop entirely (fixed-sweep benchmarking).
    if (opts.tol > 0.0 &&
        delta < opts.tol * std::max(obj, std::numeric_limits<double>::min())) {
      if (stats) stats->converged = true;
      return;
    }
  }
}

std::vector<std::span<const double>> predictor_columns(const FeatureMatrix& fm,
                                                       std::size_t s) {
  std::vector<std::span<const double>> X;
  X.reserve(fm.cols() - 1);
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    if (j != s) X.push_back(fm.col(j));
  }
  return X;
}

}  // namespace

LambdaPath lambda_path(const FeatureMatrix& fm, std::size_t s) {
  if (fm.cols() < 2) fail(ErrorCode::validation, "lambda_path needs at least 2 columns");
  if (s >= fm.cols()) fail(ErrorCode::validation, "vertex index out of range");
  const auto& k = simd::active();
  const auto ys = fm.col(s);
  double lmax = 0.0;
  for (std::size_t j = 0; j < fm.cols(); ++j) {
    if (j == s) continue;
    const double v =
        std::abs(k.dot(fm.col(j).data(), ys.data(), fm.n)) / static_cast<double>(fm.n);
    lmax = std::max(lmax, v);
  }
  if (lmax < 1e-15) {
    fail(ErrorCode::degenerate,
         "degenerate penalty path: target column is orthogonal to all others (lambda_max = 0)");
  }
  LambdaPath path;
  path.lambda_max = lmax;
  path.lambda_min = lmax / 100.0;
  for (int i = 0; i < 10; ++i) {
    path.grid[i] = lmax * std::pow(100.0, -static_cast<double>(i) / 9.0);
  }
  path.grid[0] = path.lambda_max;
  path.grid[9] = path.lambda_min;
  return path;
}

std::vector<double> lasso_cd(const FeatureMatrix& fm, std::size_t s, double lambda,
                             const LassoOptions& opts, CdStats* stats,
                             const std::vector<double>* warm) {
  if (s >= fm.cols()) fail(ErrorCode::validation, "vertex index out of range");
  if (lambda < 0.0) fail(ErrorCode::validation, "lambda must be non-negative");
  if (opts.tol < 0.0) fail(ErrorCode::validation, "tol must be non-negative");

  const auto X = predictor_columns(fm, s);
  std::vector<double> beta(X.size(), 0.0);
  if (warm) {
    if (warm->size() != X.size()) {
      fail(ErrorCode::validation, "warm start has wrong length");
    }
    beta = *warm;
  }
  std::vector<double> residual;
  cd_solve(fm.col(s), X, lambda, opts, beta, residual, stats);
  return beta;
}

NeighborhoodFit cv_select_lambda(const FeatureMatrix& fm, std::size_t s,
                                 const CvOptions& opts) {
  const std::size_t N = fm.n;
  const std::size_t S = fm.cols();
  if (opts.folds < 2) fail(ErrorCode::config, "cross-validation needs >= 2 folds");
  if (N < opts.folds) {
    fail(ErrorCode::validation, "fewer rows than cross-validation folds");
  }
  const LambdaPath path = lambda_path(fm, s);

  // Seeded shuffle, then contiguous blocks.
  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  Rng rng(Rng::derive(opts.seed, s));
  rng.shuffle(order);

  std::array<double, 10> cv_sse{};
  std::array<std::array<double, 10>, 2> fold_stats{};  // sum, sum of squares
  std::vector<double> ytr, yval, beta, residual, val_resid;
  std::vector<std::vector<double>> Xtr(S - 1), Xval(S - 1);

  std::size_t fold_begin = 0;
  for (std::size_t f = 0; f < opts.folds; ++f) {
    const std::size_t fold_size = N / opts.folds + (f < N % opts.folds ? 1 : 0);
    const std::size_t fold_end = fold_begin + fold_size;

    ytr.clear();
    yval.clear();
    for (auto& c : Xtr) c.clear();
    for (auto& c : Xval) c.clear();
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t row = order[i];
      const bool held_out = i >= fold_begin && i < fold_end;
      std::size_t jj = 0;
      for (std::size_t j = 0; j < S; ++j) {
        const double v = fm.col(j)[row];
        if (j == s) {
          (held_out ? yval : ytr).push_back(v);
        } else {
          (held_out ? Xval[jj] : Xtr[jj]).push_back(v);
          ++jj;
        }
      }
    }

    std::vector<std::span<const double>> Xtr_spans;
    for (const auto& c : Xtr) Xtr_spans.emplace_back(c.data(), c.size());

    beta.assign(S - 1, 0.0);
    for (int li = 0; li < 10; ++li) {
      cd_solve(ytr, Xtr_spans, path.grid[li], opts.lasso, beta, residual, nullptr);
      val_resid.assign(yval.begin(), yval.end());
      for (std::size_t j = 0; j < S - 1; ++j) {
        if (beta[j] != 0.0) {
          simd::active().axpy(-beta[j], Xval[j].data(), val_resid.data(),
                              val_resid.size());
        }
      }
      const double sse = simd::active().sumsq(val_resid.data(), val_resid.size());
      cv_sse[li] += sse;
      const double fold_mse = sse / static_cast<double>(val_resid.size());
      fold_stats[0][li] += fold_mse;
      fold_stats[1][li] += fold_mse * fold_mse;
    }
    fold_begin = fold_end;
  }

  NeighborhoodFit fit;
  fit.vertex = s;
  fit.cv_curve.resize(10);
  fit.cv_se.resize(10);
  int minimum = 0;
  const double folds_d = static_cast<double>(opts.folds);
  for (int li = 0; li < 10; ++li) {
    fit.cv_curve[li] = cv_sse[li] / static_cast<double>(N);
    const double mean = fold_stats[0][li] / folds_d;
    const double var = std::max(fold_stats[1][li] / folds_d - mean * mean, 0.0);
    fit.cv_se[li] = std::sqrt(var / folds_d);
    if (fit.cv_curve[li] < fit.cv_curve[minimum]) minimum = li;  // tie keeps larger lambda
  }
  int best = minimum;
  if (opts.one_se_rule) {
    // Largest lambda statistically indistinguishable from the minimum.
    const double threshold = fit.cv_curve[minimum] + fit.cv_se[minimum];
    for (int li = 0; li < 10; ++li) {
      if (fit.cv_curve[li] <= threshold) {
        best = li;
        break;
      }
    }
  }
  fit.lambda = path.grid[best];
  fit.cv_loss = fit.cv_curve[best];

  // Refit on all rows, warm-started along the path down to the winner.
  const auto X = predictor_columns(fm, s);
  beta.assign(S - 1, 0.0);
  CdStats stats;
  for (int li = 0; li <= best; ++li) {
    stats = CdStats{};
    cd_solve(fm.col(s), X, path.grid[li], opts.lasso, beta, residual, &stats);
  }
  fit.converged = stats.converged;
  fit.beta = beta;
  fit.noise_var = simd::active().sumsq(residual.data(), residual.size()) /
                  static_cast<double>(N);
  for (std::size_t j = 0, jj = 0; j < S; ++j) {
    if (j == s) continue;
    if (beta[jj] != 0.0) fit.support.push_back(j);
    ++jj;
  }
  return fit;
}

std::vector<std::pair<std::size_t, std::size_t>> combine_neighborhoods(
    const std::vector<std::vector<std::size_t>>& supports, EdgeRule rule,
    std::size_t n_vertices) {
  std::vector<std::vector<bool>> selected(n_vertices,
                                          std::vector<bool>(n_vertices, false));
  for (std::size_t s = 0; s < supports.size(); ++s) {
    for (std::size_t j : supports[s]) selected[s][j] = true;
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    for (std::size_t j = i + 1; j < n_vertices; ++j) {
      const bool keep = rule == EdgeRule::Or ? (selected[i][j] || selected[j][i])
                                             : (selected[i][j] && selected[j][i]);
      if (keep) edges.emplace_back(i, j);
    }
  }
  return edges;
}

NeighborhoodGraph fit_graph(const FeatureMatrix& fm, EdgeRule rule,
                            const CvOptions& opts) {
  const std::size_t S = fm.cols();
  if (S < 2) fail(ErrorCode::validation, "fit_graph needs at least 2 columns");

  NeighborhoodGraph graph;
  graph.labels = fm.labels;
  graph.rule = rule;
  graph.fits.resize(S);
  std::vector<std::vector<std::size_t>> supports(S);
  for (std::size_t s = 0; s < S; ++s) {
    try {
      graph.fits[s] = cv_select_lambda(fm, s, opts);
      supports[s] = graph.fits[s]->support;
    } catch (const Error& e) {
      graph.defects.push_back("vertex " + fm.labels[s] + ": " + e.what());
    }
  }
  graph.edges = combine_neighborhoods(supports, rule, S);

  // Symmetric partial-correlation summary: geometric mean of the two
  // regression coefficients when their signs agree, zero otherwise.
  graph.partial_correlations = Mat::identity(S);
  auto beta_of = [&](std::size_t s, std::size_t j) -> double {
    const auto& fit = graph.fits[s];
    if (!fit) return 0.0;
    return fit->beta[j < s ? j : j - 1];
  };
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = i + 1; j < S; ++j) {
      const double bij = beta_of(i, j);
      const double bji = beta_of(j, i);
      double rho = 0.0;
      const double prod = bij * bji;
      if (prod > 0.0) {
        rho = std::sqrt(std::min(prod, 1.0));
        if (bij < 0.0) rho = -rho;
      }
      graph.partial_correlations.at(i, j) = rho;
      graph.partial_correlations.at(j, i) = rho;
    }
  }
  return graph;
}

CorrelationMatrix pearson_matrix(const FeatureMatrix& fm) {
  const std::size_t S = fm.cols();
  const std::size_t N = fm.n;
  if (N < 2) fail(ErrorCode::validation, "pearson_matrix needs at least 2 rows");
  const auto& k = simd::active();

  // Center columns (they are near-centered already; do it exactly anyway).
  std::vector<std::vector<double>> centered(S);
  std::vector<double> norms(S);
  for (std::size_t j = 0; j < S; ++j) {
    centered[j].assign(fm.col(j).begin(), fm.col(j).end());
    const double mean = k.sum(centered[j].data(), N) / static_cast<double>(N);
    simd::affine(centered[j], 1.0, -mean);
    norms[j] = std::sqrt(k.sumsq(centered[j].data(), N));
    if (norms[j] <= 0.0) {
      fail(ErrorCode::degenerate, "constant column in correlation input: " + fm.labels[j]);
    }
  }

  CorrelationMatrix out;
  out.kind = CorrelationMatrix::Kind::pearson;
  out.labels = fm.labels;
  out.values = Mat::identity(S);
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = i + 1; j < S; ++j) {
      double r = k.dot(centered[i].data(), centered[j].data(), N) / (norms[i] * norms[j]);
      r = std::clamp(r, -1.0, 1.0);
      out.values.at(i, j) = r;
      out.values.at(j, i) = r;
    }
  }
  return out;
}

CorrelationMatrix partial_correlation_matrix(const NeighborhoodGraph& graph) {
  CorrelationMatrix out;
  out.kind = CorrelationMatrix::Kind::partial;
  out.labels = graph.labels;
  out.values = graph.partial_correlations;
  return out;
}

}  // namespace glseg
