#include "glseg/causality/granger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "glseg/core/error.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

void Design::add_column(std::span<const double> column, std::string name) {
  if (p == 0) {
    n = column.size();
  } else if (column.size() != n) {
    fail(ErrorCode::internal, "design column length mismatch");
  }
  data.insert(data.end(), column.begin(), column.end());
  col_names.push_back(std::move(name));
  ++p;
}

OlsResult ols(const Design& design, std::span<const double> y) {
  const std::size_t n = design.n;
  const std::size_t p = design.p;
  if (n <= p) {
    fail(ErrorCode::validation, "ols needs more rows than columns");
  }
  if (y.size() != n) fail(ErrorCode::validation, "ols response length mismatch");

  // Work on copies: A is transformed in place, qty accumulates Q^T y.
  std::vector<double> a(design.data);
  std::vector<double> qty(y.begin(), y.end());
  std::vector<std::size_t> pivot(p);
  std::iota(pivot.begin(), pivot.end(), std::size_t{0});
  auto col = [&](std::size_t j) { return a.data() + j * n; };
  const auto& kt = simd::active();

  std::vector<double> colnorm(p);
  for (std::size_t j = 0; j < p; ++j) colnorm[j] = kt.sumsq(col(j), n);

  double r00 = 0.0;
  for (std::size_t k = 0; k < p; ++k) {
    // Pivot the column with the largest remaining norm to the front.
    std::size_t best = k;
    for (std::size_t j = k + 1; j < p; ++j) {
      if (colnorm[j] > colnorm[best]) best = j;
    }
    if (best != k) {
      for (std::size_t i = 0; i < n; ++i) std::swap(col(k)[i], col(best)[i]);
      std::swap(colnorm[k], colnorm[best]);
      std::swap(pivot[k], pivot[best]);
    }

    // Householder vector for column k below the diagonal.
    double* x = col(k) + k;
    const std::size_t m = n - k;
    const double sigma = std::sqrt(kt.sumsq(x, m));
    if (k == 0) r00 = sigma;
    if (sigma <= 1e-10 * std::max(r00, 1.0)) {
      std::string names;
      for (std::size_t j = k; j < p; ++j) {
        if (!names.empty()) names += ", ";
        names += design.col_names.empty() ? ("col" + std::to_string(pivot[j]))
                                          : design.col_names[pivot[j]];
      }
      fail(ErrorCode::numeric, "design matrix is rank deficient; collinear columns: " + names);
    }
    const double alpha = x[0] >= 0.0 ? -sigma : sigma;
    x[0] -= alpha;
    const double vnorm2 = kt.sumsq(x, m);
    if (vnorm2 > 0.0) {
      for (std::size_t j = k + 1; j < p; ++j) {
        double* cj = col(j) + k;
        const double proj = 2.0 * kt.dot(x, cj, m) / vnorm2;
        kt.axpy(-proj, x, cj, m);
        // Remove the eliminated row's contribution from the pivoting norm.
        colnorm[j] = std::max(colnorm[j] - cj[0] * cj[0], 0.0);
      }
      double* yk = qty.data() + k;
      const double proj = 2.0 * kt.dot(x, yk, m) / vnorm2;
      kt.axpy(-proj, x, yk, m);
    }
    // After reflection, column k is (.., alpha, 0, ..): R_kk = alpha.
    col(k)[k] = alpha;
    for (std::size_t i = k + 1; i < n; ++i) col(k)[i] = 0.0;
  }

  OlsResult result;
  result.rss = kt.sumsq(qty.data() + p, n - p);
  // Back substitution on R (stored in the leading p x p of the columns).
  std::vector<double> bperm(p);
  for (std::size_t ki = p; ki-- > 0;) {
    double s = qty[ki];
    for (std::size_t j = ki + 1; j < p; ++j) s -= col(j)[ki] * bperm[j];
    bperm[ki] = s / col(ki)[ki];
  }
  result.beta.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) result.beta[pivot[j]] = bperm[j];
  return result;
}

namespace {

double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int max_iter = 500;
  constexpr double eps = 1e-16;
  constexpr double fpmin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  fail(ErrorCode::numeric, "incomplete beta continued fraction did not converge");
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    fail(ErrorCode::validation, "incomplete beta needs positive parameters");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * betacf(a, b, x) / a;
  }
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double f_tail(double f, unsigned d1, unsigned d2) {
  if (f < 0.0) fail(ErrorCode::validation, "f_tail needs f >= 0");
  if (d1 == 0 || d2 == 0) fail(ErrorCode::validation, "f_tail needs positive df");
  if (f == 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = d2 / (d2 + static_cast<double>(d1) * f);
  return reg_inc_beta(d2 / 2.0, d1 / 2.0, x);
}

GrangerResult granger_test(std::span<const double> x, std::span<const double> y,
                           const GrangerOptions& opts) {
  if (x.size() != y.size()) {
    fail(ErrorCode::validation, "granger_test needs aligned series of equal length");
  }
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorCode::validation, "granger_test: non-finite value in x");
  }
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorCode::validation, "granger_test: non-finite value in y");
  }

  const std::size_t T = y.size();
  auto fit_pair = [&](unsigned q, std::size_t skip, double& rss_r, double& rss_u,
                      std::size_t& n_eff) {
    // Rows t = skip .. T-1 so different lags can share a common sample.
    const std::size_t n = T - skip;
    std::vector<double> ones(n, 1.0), lag(n), target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = y[skip + i];

    Design restricted;
    restricted.add_column(ones, "intercept");
    for (unsigned l = 1; l <= q; ++l) {
      for (std::size_t i = 0; i < n; ++i) lag[i] = y[skip + i - l];
      restricted.add_column(lag, "y_lag" + std::to_string(l));
    }
    Design unrestricted = restricted;
    for (unsigned l = 1; l <= q; ++l) {
      for (std::size_t i = 0; i < n; ++i) lag[i] = x[skip + i - l];
      unrestricted.add_column(lag, "x_lag" + std::to_string(l));
    }
    rss_r = ols(restricted, target).rss;
    rss_u = ols(unrestricted, target).rss;
    n_eff = n;
  };

  unsigned q = opts.lag;
  if (opts.bic_lag) {
    // Common sample trimmed at max_lag for comparability across q.
    if (T <= 3ull * opts.max_lag + 2) {
      fail(ErrorCode::validation, "series too short for BIC lag selection");
    }
    double best_bic = std::numeric_limits<double>::infinity();
    for (unsigned cand = 1; cand <= opts.max_lag; ++cand) {
      double rss_r, rss_u;
      std::size_t n_eff;
      try {
        fit_pair(cand, opts.max_lag, rss_r, rss_u, n_eff);
      } catch (const Error&) {
        continue;
      }
      const double n = static_cast<double>(n_eff);
      const double bic = n * std::log(std::max(rss_u / n, 1e-300)) +
                         (2.0 * cand + 1.0) * std::log(n);
      if (bic < best_bic) {
        best_bic = bic;
        q = cand;
      }
    }
  }

  if (T <= 2ull * q + 2 || T < 3ull * q + 2) {
    fail(ErrorCode::validation, "series too short for lag " + std::to_string(q));
  }

  GrangerResult res;
  res.lag = q;
  double rss_r = 0.0, rss_u = 0.0;
  try {
    fit_pair(q, q, rss_r, rss_u, res.n_effective);
  } catch (const Error&) {
    // Constant regressors or exact collinearity: no evidence either way.
    res.n_effective = T - q;
    res.f_statistic = 0.0;
    res.p_value = 1.0;
    res.degenerate = true;
    res.causal = false;
    return res;
  }

  const std::size_t n = res.n_effective;
  const unsigned d1 = q;
  const std::size_t d2 = n - 2ull * q - 1;
  const double num = std::max(rss_r - rss_u, 0.0) / d1;
  const double den = rss_u / static_cast<double>(d2);
  if (den <= 0.0) {
    if (num <= 0.0) {
      res.f_statistic = 0.0;
      res.p_value = 1.0;
      res.degenerate = true;
    } else {
      res.f_statistic = std::numeric_limits<double>::infinity();
      res.p_value = 0.0;
    }
  } else {
    res.f_statistic = num / den;
    res.p_value = f_tail(res.f_statistic, d1, static_cast<unsigned>(d2));
  }
  res.causal = res.p_value < opts.alpha;
  return res;
}

std::vector<double> downsampled_series(const Dataset& ds, const std::string& player,
                                       const std::string& feature,
                                       unsigned window_minutes) {
  const int col = ds.feature_index(feature);
  if (col < 0) fail(ErrorCode::schema, "unknown feature: " + feature);
  if (window_minutes == 0) fail(ErrorCode::config, "window must be at least 1 minute");

  std::vector<double> series;
  std::int64_t bucket = std::numeric_limits<std::int64_t>::min();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.player_ids[i] != player || ds.row_missing[i]) continue;
    const std::int64_t b = ds.timestamps[i] / window_minutes;
    if (b != bucket) {
      if (count > 0) series.push_back(acc / static_cast<double>(count));
      bucket = b;
      acc = 0.0;
      count = 0;
    }
    acc += ds.at(i, col);
    ++count;
  }
  if (count > 0) series.push_back(acc / static_cast<double>(count));
  return series;
}

namespace {

GrangerResult pooled_granger(const Dataset& ds, const std::vector<std::string>& players,
                             const std::string& cause, const std::string& effect,
                             const GrangerOptions& opts, unsigned window) {
  const unsigned q = opts.lag;
  Design restricted;
  std::vector<double> target;
  std::vector<std::vector<double>> xs, ys;
  std::size_t total = 0;
  for (const auto& p : players) {
    xs.push_back(downsampled_series(ds, p, cause, window));
    ys.push_back(downsampled_series(ds, p, effect, window));
    if (ys.back().size() > q) total += ys.back().size() - q;
  }
  const std::size_t m = players.size();
  if (total <= m + 2ull * q) {
    fail(ErrorCode::validation, "pooled series too short for lag " + std::to_string(q));
  }

  // Player intercept dummies, then shared y lags, then shared x lags.
  std::vector<std::vector<double>> cols(m + 2 * q, std::vector<double>(total, 0.0));
  target.resize(total);
  std::size_t row = 0;
  for (std::size_t pi = 0; pi < m; ++pi) {
    const auto& yv = ys[pi];
    const auto& xv = xs[pi];
    for (std::size_t t = q; t < yv.size(); ++t, ++row) {
      target[row] = yv[t];
      cols[pi][row] = 1.0;
      for (unsigned l = 1; l <= q; ++l) {
        cols[m + l - 1][row] = yv[t - l];
        cols[m + q + l - 1][row] = xv[t - l];
      }
    }
  }
  for (std::size_t pi = 0; pi < m; ++pi) {
    restricted.add_column(cols[pi], "player" + std::to_string(pi));
  }
  for (unsigned l = 1; l <= q; ++l) {
    restricted.add_column(cols[m + l - 1], "y_lag" + std::to_string(l));
  }
  Design unrestricted = restricted;
  for (unsigned l = 1; l <= q; ++l) {
    unrestricted.add_column(cols[m + q + l - 1], "x_lag" + std::to_string(l));
  }

  GrangerResult res;
  res.cause = cause;
  res.effect = effect;
  res.lag = q;
  res.n_effective = total;
  double rss_r, rss_u;
  try {
    rss_r = ols(restricted, target).rss;
    rss_u = ols(unrestricted, target).rss;
  } catch (const Error&) {
    res.f_statistic = 0.0;
    res.p_value = 1.0;
    res.degenerate = true;
    return res;
  }
  const std::size_t d2 = total - m - 2ull * q;
  const double num = std::max(rss_r - rss_u, 0.0) / q;
  const double den = rss_u / static_cast<double>(d2);
  if (den <= 0.0) {
    res.f_statistic = 0.0;
    res.p_value = 1.0;
    res.degenerate = true;
  } else {
    res.f_statistic = num / den;
    res.p_value = f_tail(res.f_statistic, q, static_cast<unsigned>(d2));
  }
  res.causal = res.p_value < opts.alpha;
  return res;
}

}  // namespace

CausalityTable causality_table(const Dataset& ds, const ClassAssignment& classes,
                               const std::vector<std::pair<std::string, std::string>>& pairs,
                               const GrangerOptions& granger,
                               const SeriesOptions& series) {
  for (const auto& [cause, effect] : pairs) {
    if (ds.feature_index(cause) < 0) fail(ErrorCode::schema, "unknown feature: " + cause);
    if (ds.feature_index(effect) < 0) fail(ErrorCode::schema, "unknown feature: " + effect);
  }

  CausalityTable table;
  table.classes = {EnergyClass::Low, EnergyClass::Medium, EnergyClass::High};
  table.pairs = pairs;

  for (EnergyClass cls : table.classes) {
    std::string rep;
    std::vector<std::string> members = classes.members(cls);
    if (series.mode == SeriesMode::representative && !members.empty()) {
      rep = representative_player(classes, cls);
    }
    for (const auto& [cause, effect] : pairs) {
      CausalityCell cell;
      cell.cls = cls;
      cell.player = rep;
      cell.result.cause = cause;
      cell.result.effect = effect;
      cell.result.lag = granger.lag;
      if (members.empty()) {
        cell.result.degenerate = true;
        cell.result.p_value = 1.0;
        table.notes.push_back(std::string("class ") + energy_class_name(cls) +
                              " is empty; cells degenerate");
      } else {
        try {
          if (series.mode == SeriesMode::representative) {
            const auto xs = downsampled_series(ds, rep, cause, series.window_minutes);
            const auto ys = downsampled_series(ds, rep, effect, series.window_minutes);
            cell.result = granger_test(xs, ys, granger);
            cell.result.cause = cause;
            cell.result.effect = effect;
          } else {
            cell.result = pooled_granger(ds, members, cause, effect, granger,
                                         series.window_minutes);
          }
        } catch (const Error& e) {
          cell.result.degenerate = true;
          cell.result.f_statistic = 0.0;
          cell.result.p_value = 1.0;
          cell.result.causal = false;
          table.notes.push_back(std::string(energy_class_name(cls)) + " " + cause +
                                "=>" + effect + ": " + e.what());
        }
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace glseg
