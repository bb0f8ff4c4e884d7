#pragma once

// Variance estimation and period-pi cosine fitting. The fit is linear least
// squares on the basis {1, cos 2a, sin 2a}; amplitude and phase come from the
// two harmonic coefficients, with the sign folded into alpha0 so that the
// fitted curve is offset - amplitude * cos(2 alpha - 2 alpha0).

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cavspin/ellipse.hpp"
#include "cavspin/errors.hpp"
#include "cavspin/sequence.hpp"

namespace cavspin {

struct VariancePoint {
  double alpha = 0.0;    // rad
  double sigma2 = 0.0;   // normalized variance 2 var(S_alpha) / s0
  double std_err = 0.0;  // Gaussian sampling-theory error on sigma2
  int n = 0;             // shots behind this point
};

// sigma2 = 2 * unbiased sample variance / s0; its standard error uses the
// Gaussian approximation var(sample var) = 2 sigma^4 / (n - 1).
inline VariancePoint normalized_sample_variance(const std::vector<double>& values, double alpha,
                                                double s0) {
  if (values.size() < 2) throw DataError("normalized_sample_variance: need at least 2 values");
  if (!(s0 > 0.0)) throw std::invalid_argument("normalized_sample_variance: s0 must be > 0");
  const int n = int(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = ss / (n - 1);

  VariancePoint p;
  p.alpha = alpha;
  p.sigma2 = 2.0 * var / s0;
  p.std_err = p.sigma2 * std::sqrt(2.0 / (n - 1));
  p.n = n;
  return p;
}

// Shots grouped by their alpha value (first-encounter order; run_scan emits
// each alpha as one contiguous block).
inline std::vector<VariancePoint> variance_points(const std::vector<ShotRecord>& records,
                                                  double s0) {
  std::vector<double> alphas;
  std::vector<std::vector<double>> groups;
  for (const ShotRecord& r : records) {
    std::size_t k = 0;
    while (k < alphas.size() && alphas[k] != r.alpha) ++k;
    if (k == alphas.size()) {
      alphas.push_back(r.alpha);
      groups.emplace_back();
    }
    groups[k].push_back(r.sz_measured);
  }
  std::vector<VariancePoint> out;
  out.reserve(alphas.size());
  for (std::size_t k = 0; k < alphas.size(); ++k)
    out.push_back(normalized_sample_variance(groups[k], alphas[k], s0));
  return out;
}

struct CosineFit {
  double offset = 0.0;
  double amplitude = 0.0;  // >= 0
  double alpha0 = 0.0;     // rad, in (-pi/2, pi/2]
  // Covariance of (offset, a_c, a_s) where the fitted curve in harmonic form
  // is offset + a_c cos 2a + a_s sin 2a.
  std::array<std::array<double, 3>, 3> param_cov{};
  double residual_rms = 0.0;

  double harmonic_c() const { return -amplitude * std::cos(2.0 * alpha0); }
  double harmonic_s() const { return -amplitude * std::sin(2.0 * alpha0); }
  double evaluate(double alpha) const {
    return offset - amplitude * std::cos(2.0 * (alpha - alpha0));
  }
};

namespace detail {

// Solves the symmetric 3x3 system M x = r in place and inverts M; throws on
// (numerical) rank deficiency, which is how an alpha grid degenerate modulo
// pi shows up.
inline void solve3_and_invert(const std::array<std::array<double, 3>, 3>& m,
                              std::array<double, 3>& r,
                              std::array<std::array<double, 3>, 3>& inv) {
  std::array<std::array<double, 6>, 3> a{};
  double scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a[i][j] = m[i][j];
      a[i][j + 3] = (i == j) ? 1.0 : 0.0;
      scale = std::max(scale, std::abs(m[i][j]));
    }
  if (!(scale > 0.0)) throw DataError("cosine fit: degenerate normal equations");

  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int i = col + 1; i < 3; ++i)
      if (std::abs(a[i][col]) > std::abs(a[piv][col])) piv = i;
    if (std::abs(a[piv][col]) < 1e-12 * scale)
      throw DataError("cosine fit: need at least 3 distinct angles modulo pi");
    std::swap(a[col], a[piv]);
    std::swap(r[col], r[piv]);
    const double d = a[col][col];
    for (int j = 0; j < 6; ++j) a[col][j] /= d;
    r[col] /= d;
    for (int i = 0; i < 3; ++i) {
      if (i == col) continue;
      const double f = a[i][col];
      if (f == 0.0) continue;
      for (int j = 0; j < 6; ++j) a[i][j] -= f * a[col][j];
      r[i] -= f * r[col];
    }
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) inv[i][j] = a[i][j + 3];
}

}  // namespace detail

// Weighted (1/stderr^2) or plain linear least squares of sigma2(alpha) on
// {1, cos 2a, sin 2a}. With per-point errors the parameter covariance is the
// inverse normal matrix; without them it is scaled by the residual variance.
inline CosineFit fit_cosine(const std::vector<VariancePoint>& points, bool weighted = true) {
  if (points.size() < 3) throw DataError("cosine fit: need at least 3 variance points");

  std::array<std::array<double, 3>, 3> m{};
  std::array<double, 3> r{};
  for (const VariancePoint& p : points) {
    double w = 1.0;
    if (weighted) {
      if (!(p.std_err > 0.0))
        throw DataError("cosine fit: weighted fit requires positive stderr on every point");
      w = 1.0 / (p.std_err * p.std_err);
    }
    const std::array<double, 3> phi{1.0, std::cos(2.0 * p.alpha), std::sin(2.0 * p.alpha)};
    for (int i = 0; i < 3; ++i) {
      r[i] += w * phi[i] * p.sigma2;
      for (int j = 0; j < 3; ++j) m[i][j] += w * phi[i] * phi[j];
    }
  }

  std::array<std::array<double, 3>, 3> inv{};
  detail::solve3_and_invert(m, r, inv);
  const double c0 = r[0], cc = r[1], cs = r[2];

  CosineFit fit;
  fit.offset = c0;
  fit.amplitude = std::hypot(cc, cs);
  fit.alpha0 = fit.amplitude > 0.0 ? 0.5 * std::atan2(-cs, -cc) : 0.0;

  double ss = 0.0;
  for (const VariancePoint& p : points) {
    const double res = p.sigma2 - (c0 + cc * std::cos(2.0 * p.alpha) + cs * std::sin(2.0 * p.alpha));
    ss += res * res;
  }
  fit.residual_rms = std::sqrt(ss / points.size());

  if (weighted) {
    fit.param_cov = inv;
  } else {
    const double dof = double(points.size()) - 3.0;
    const double s2 = dof > 0.0 ? ss / dof : 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) fit.param_cov[i][j] = inv[i][j] * s2;
  }
  return fit;
}

// First-order standard error of offset + sign*amplitude (sign -1 for the
// minimum, +1 for the maximum); gradient in the (offset, a_c, a_s) basis,
// with the amplitude-zero limit falling back to the offset error.
inline double extremum_std_error(const CosineFit& fit, double sign) {
  std::array<double, 3> g{1.0, 0.0, 0.0};
  if (fit.amplitude > 0.0) {
    g[1] = sign * fit.harmonic_c() / fit.amplitude;
    g[2] = sign * fit.harmonic_s() / fit.amplitude;
  }
  double var = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) var += g[i] * fit.param_cov[i][j] * g[j];
  return std::sqrt(std::max(var, 0.0));
}

// Standard error of alpha0 = atan2(a_s, a_c)/2 by the same propagation.
inline double alpha0_std_error(const CosineFit& fit) {
  if (!(fit.amplitude > 0.0)) return 0.0;
  const double cc = fit.harmonic_c(), cs = fit.harmonic_s();
  const double a4 = fit.amplitude * fit.amplitude * fit.amplitude * fit.amplitude;
  const double var = 0.25 *
                     (cc * cc * fit.param_cov[2][2] + cs * cs * fit.param_cov[1][1] -
                      2.0 * cc * cs * fit.param_cov[1][2]) /
                     a4;
  return std::sqrt(std::max(var, 0.0));
}

// Squeezing figures extracted from a fit, with first-order error propagation
// of the fit covariance onto sigma2_min and zeta.
struct FitReport {
  SqueezingReport squeezing;
  double sigma2_min = 0.0;
  double sigma2_max = 0.0;
  double sigma2_min_err = 0.0;
  double zeta_err = 0.0;
};

inline FitReport extract_report(const CosineFit& fit, const StateParams& p) {
  const double s2min = fit.offset - fit.amplitude;
  const double s2max = fit.offset + fit.amplitude;
  if (!(s2min > 0.0)) throw DataError("extract_report: fitted minimum variance is not positive");

  FitReport rep;
  rep.sigma2_min = s2min;
  rep.sigma2_max = s2max;
  rep.squeezing = metrological_squeezing(p, s2min, s2max);
  rep.sigma2_min_err = extremum_std_error(fit, -1.0);
  rep.zeta_err = rep.sigma2_min_err * p.contrast_in / (p.contrast * p.contrast);
  return rep;
}

}  // namespace cavspin
