#pragma once

// Closed-form model of the sheared-state uncertainty ellipse: transverse
// moments of the twisted state after photon-shot-noise dephasing, the
// normalized variance observed after an analysis rotation by alpha, its
// extrema and orientation, and the metrological squeezing figure.

#include <cmath>
#include <stdexcept>

#include "cavspin/errors.hpp"

namespace cavspin {

struct StateParams {
  double s0 = 0.0;           // effective spin S0
  double s = 0.0;            // Bloch radius S (contrast-reduced)
  double q = 0.0;            // shearing strength
  double xi = 1.0;
  double gamma_factor = 1.0;
  double readout_var = 0.0;  // sigma^2_ro, normalized units
  double contrast = 1.0;     // C
  double contrast_in = 1.0;  // C_in

  void validate() const {
    if (!(s0 > 0.0) || !(s > 0.0) || s > s0 * (1.0 + 1e-12))
      throw std::invalid_argument("StateParams: need 0 < s <= s0");
    if (q < 0.0) throw std::invalid_argument("StateParams: q must be >= 0");
    if (gamma_factor < 1.0) throw std::invalid_argument("StateParams: gamma_factor must be >= 1");
    if (xi < 0.0 || xi > 1.0) throw std::invalid_argument("StateParams: xi must be in [0, 1]");
    if (readout_var < 0.0) throw std::invalid_argument("StateParams: readout_var must be >= 0");
    if (!(contrast > 0.0) || contrast > 1.0 || !(contrast_in > 0.0) || contrast_in > 1.0)
      throw std::invalid_argument("StateParams: contrasts must be in (0, 1]");
  }
};

struct MomentPrediction {
  double var_sy = 0.0;
  double var_sz = 0.0;
  double w = 0.0;
  double s = 0.0;
  double s0 = 0.0;
};

struct EllipsePrediction {
  double v_plus = 0.0;
  double v_minus = 0.0;
  double amp_a = 0.0;
  double alpha0 = 0.0;  // rad, in (-pi/2, pi/2]
  double sigma2_max = 0.0;
  double sigma2_min = 0.0;
};

struct SqueezingReport {
  double zeta = 0.0;
  double zeta_db = 0.0;
  double sigma2_min_db = 0.0;
  double sigma2_max_db = 0.0;
  double intrinsic_sigma2 = 0.0;  // readout noise subtracted, linear units
};

inline double db(double linear) {
  if (!(linear > 0.0)) throw std::invalid_argument("db: input must be > 0");
  return 10.0 * std::log10(linear);
}

// Sheared-state moments:
//   var S_y = S^2/2 + S0/4 - (S^2/2 - S0/4)(1 - gamma Q/S0) exp(-xi^2 Q^2/S0)
//   W       = xi Q S exp(-xi^2 Q^2 / (4 S0))
//   var S_z = S0/2
inline MomentPrediction predicted_moments(const StateParams& p) {
  p.validate();
  MomentPrediction m;
  m.s = p.s;
  m.s0 = p.s0;
  m.var_sz = 0.5 * p.s0;
  const double a = 0.5 * p.s * p.s + 0.25 * p.s0;
  const double b = 0.5 * p.s * p.s - 0.25 * p.s0;
  m.var_sy = a - b * (1.0 - p.gamma_factor * p.q / p.s0) *
                     std::exp(-p.xi * p.xi * p.q * p.q / p.s0);
  m.w = p.xi * p.q * p.s * std::exp(-p.xi * p.xi * p.q * p.q / (4.0 * p.s0));
  return m;
}

// Ellipse geometry from transverse moments: V+- = var S_y +- var S_z,
// A = sqrt(V-^2 + W^2), tan(2 alpha0) = W / V-.
inline EllipsePrediction ellipse_from_moments(double var_sy, double var_sz, double w,
                                              double s0, double readout_var) {
  EllipsePrediction e;
  e.v_plus = var_sy + var_sz;
  e.v_minus = var_sy - var_sz;
  e.amp_a = std::sqrt(e.v_minus * e.v_minus + w * w);
  e.alpha0 = e.amp_a > 0.0 ? 0.5 * std::atan2(w, e.v_minus) : 0.0;
  e.sigma2_max = (e.v_plus + e.amp_a) / s0 + readout_var;
  e.sigma2_min = (e.v_plus - e.amp_a) / s0 + readout_var;
  return e;
}

inline EllipsePrediction variance_extrema(const StateParams& p) {
  const MomentPrediction m = predicted_moments(p);
  return ellipse_from_moments(m.var_sy, m.var_sz, m.w, p.s0, p.readout_var);
}

// sigma^2(alpha) = [V+ - A cos(2 alpha - 2 alpha0)] / S0 + sigma^2_ro
inline double normalized_variance(const StateParams& p, double alpha) {
  const EllipsePrediction e = variance_extrema(p);
  return (e.v_plus - e.amp_a * std::cos(2.0 * alpha - 2.0 * e.alpha0)) / p.s0 + p.readout_var;
}

// zeta = sigma^2_min C_in / C^2; < 1 certifies metrologically useful
// entanglement. The intrinsic variance subtracts the readout contribution.
inline SqueezingReport metrological_squeezing(const StateParams& p, double sigma2_min,
                                              double sigma2_max) {
  if (!(p.contrast > 0.0))
    throw std::invalid_argument("metrological_squeezing: contrast must be > 0");
  SqueezingReport r;
  r.zeta = sigma2_min * p.contrast_in / (p.contrast * p.contrast);
  r.zeta_db = db(r.zeta);
  r.sigma2_min_db = db(sigma2_min);
  r.sigma2_max_db = db(sigma2_max);
  r.intrinsic_sigma2 = sigma2_min - p.readout_var;
  return r;
}

// Reproduction conventions for the technical parameter tables (anchored to
// measured values; interpolation is a documented convention, not physics).

// Bloch radius fraction S/S0: 0.80 up to q=20, then log-linear in q down to
// 0.48 at q=200, constant outside.
inline double bloch_radius_fraction(double q) {
  if (q <= 20.0) return 0.80;
  if (q >= 200.0) return 0.48;
  const double t = (std::log10(q) - std::log10(20.0)) / (std::log10(200.0) - std::log10(20.0));
  return 0.80 + t * (0.48 - 0.80);
}

// Contrast C(q): anchors (0, 0.80) and (19, 0.78), linear between, flat after.
inline double contrast_of_q(double q) {
  if (q <= 0.0) return 0.80;
  if (q >= 19.0) return 0.78;
  return 0.80 + (q / 19.0) * (0.78 - 0.80);
}

}  // namespace cavspin
