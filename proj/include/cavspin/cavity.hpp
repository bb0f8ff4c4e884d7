#pragma once

// Effective physical parameters of the atom-cavity system: ensemble-averaged
// coupling, single-photon phase shift, shearing strength, probe-noise factors.
// Pure arithmetic on plain structs; angular frequencies are rad/s throughout
// (the config layer converts from Hz).

#include <cmath>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cavspin/errors.hpp"

namespace cavspin {

struct CavityParams {
  double kappa = 0.0;       // cavity linewidth, rad/s
  double gamma_atom = 0.0;  // excited-state decay, rad/s
  double delta = 0.0;       // effective detuning, rad/s
  double probe_detuning_fraction = 0.5;  // x = omega_p / kappa

  void validate() const {
    if (!(kappa > 0.0) || !(gamma_atom > 0.0) || !(delta > 0.0))
      throw std::invalid_argument("CavityParams: all rates must be > 0");
    if (!std::isfinite(probe_detuning_fraction))
      throw std::invalid_argument("CavityParams: probe_detuning_fraction must be finite");
  }
};

struct EnsembleCoupling {
  double n_tot = 0.0;
  std::vector<double> eta_samples;   // per-position cooperativities, or
  std::optional<double> eta_eff;     // the effective value directly

  void validate() const {
    if (!(n_tot >= 1.0)) throw std::invalid_argument("EnsembleCoupling: n_tot must be >= 1");
    if (eta_samples.empty() && !eta_eff)
      throw std::invalid_argument("EnsembleCoupling: need eta_samples or eta_eff");
    for (double e : eta_samples)
      if (e < 0.0) throw std::invalid_argument("EnsembleCoupling: eta samples must be >= 0");
    if (eta_eff && !(*eta_eff > 0.0))
      throw std::invalid_argument("EnsembleCoupling: eta_eff must be > 0");
  }
};

struct ProbeConfig {
  double p0 = 0.0;  // mean transmitted photons per squeezing interaction
  std::optional<double> frac_power_var;  // added transmitted-photon variance; absent
                                         // means "use the aggregate noise law"

  void validate() const {
    if (p0 < 0.0) throw std::invalid_argument("ProbeConfig: p0 must be >= 0");
    if (frac_power_var && *frac_power_var < 0.0)
      throw std::invalid_argument("ProbeConfig: frac_power_var must be >= 0");
  }
};

struct EffectiveCoupling {
  double eta_eff = 0.0;
  double n0 = 0.0;
};

struct EffectiveParams {
  double eta_eff = 0.0;
  double n0 = 0.0;
  double s0 = 0.0;  // N0 / 2
  double phi1 = 0.0;
  double q = 0.0;
  double xi = 1.0;
  double gamma_factor = 1.0;
  double phase_var = 0.0;
};

// eta = <eta^2>/<eta> and N0 = N_tot <eta>/eta: the unique pair for which an
// equivalent uniform ensemble produces both the same mean shift and the same
// shift variance. With eta_eff given directly, n_tot is already the effective
// atom number.
inline EffectiveCoupling effective_coupling(const EnsembleCoupling& ens) {
  ens.validate();
  if (ens.eta_samples.empty()) return {*ens.eta_eff, ens.n_tot};

  double m1 = 0.0, m2 = 0.0;
  for (double e : ens.eta_samples) {
    m1 += e;
    m2 += e * e;
  }
  m1 /= double(ens.eta_samples.size());
  m2 /= double(ens.eta_samples.size());
  if (!(m1 > 0.0))
    throw std::invalid_argument("effective_coupling: all-zero eta samples");
  const double eta = m2 / m1;
  return {eta, ens.n_tot * m1 / eta};
}

// phi1 = f * eta * Gamma / delta; f is the transition's oscillator strength.
inline double single_photon_phase(const CavityParams& cav, double eta_eff,
                                  double oscillator_strength = 2.0 / 3.0) {
  if (cav.delta == 0.0) throw std::invalid_argument("single_photon_phase: delta must be nonzero");
  return oscillator_strength * eta_eff * cav.gamma_atom / cav.delta;
}

inline double shearing_strength(double s0, double p0, double phi1) {
  if (s0 < 0.0 || p0 < 0.0)
    throw std::invalid_argument("shearing_strength: inputs must be >= 0");
  return s0 * p0 * phi1 * phi1;
}

inline constexpr double kLinearizedShiftLimit = 0.1;

inline bool within_linearized_regime(double phi1, double sz) {
  return std::abs(0.5 * phi1 * sz) <= kLinearizedShiftLimit;
}

// Resonator frequency shift kappa * phi1 * sz / 2. Valid only in the
// linearized regime |phi1 sz / 2| << 1; warns beyond the threshold.
inline double cavity_shift(double phi1, double sz, double kappa,
                           std::ostream* warn = nullptr) {
  if (!within_linearized_regime(phi1, sz)) {
    std::ostream& os = warn ? *warn : std::cerr;
    os << "warning: cavity_shift outside linearized regime, |phi1*sz/2| = "
       << std::abs(0.5 * phi1 * sz) << " > " << kLinearizedShiftLimit << "\n";
  }
  return 0.5 * kappa * phi1 * sz;
}

// Change in transmitted photon number at half-linewidth probe detuning.
inline double transmission_shift(double p0, double phi1, double sz) {
  return p0 * phi1 * sz;
}

// |d ln L / d(x)|-type sensitivity factor of the Lorentzian L = 1/(1+4x^2):
// unity when the probe sits half a linewidth off resonance.
inline double xi_factor(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("xi_factor: x must be finite");
  return std::abs(4.0 * x / (1.0 + 4.0 * x * x));
}

inline double gamma_factor(double p0, double frac_power_var) {
  if (frac_power_var < 0.0)
    throw std::invalid_argument("gamma_factor: frac_power_var must be >= 0");
  if (frac_power_var == 0.0) return 1.0;
  if (!(p0 > 0.0)) throw std::invalid_argument("gamma_factor: p0 must be > 0");
  return 1.0 + 2.0 * frac_power_var / p0;
}

// Aggregate technical-noise laws: gamma = 1 + p0/scale, equivalently
// 1 + q/q_scale at the operating point p0 ~ 2162 q (8e4/37).
inline constexpr double kPhotonNoiseScale = 8.0e4;
inline constexpr double kGammaQScale = 37.0;

inline double gamma_photon_noise(double p0, double scale = kPhotonNoiseScale) {
  if (!(scale > 0.0)) throw std::invalid_argument("gamma_photon_noise: scale must be > 0");
  return 1.0 + p0 / scale;
}

inline double gamma_of_q(double q, double q_scale = kGammaQScale) {
  if (!(q_scale > 0.0)) throw std::invalid_argument("gamma_of_q: q_scale must be > 0");
  return 1.0 + q / q_scale;
}

// Photon-shot-noise phase broadening var phi = q/(2 s0) = p0 phi1^2 / 2.
inline double phase_broadening(double q, double s0) {
  if (!(s0 > 0.0)) throw std::invalid_argument("phase_broadening: s0 must be > 0");
  if (q < 0.0) throw std::invalid_argument("phase_broadening: q must be >= 0");
  return 0.5 * q / s0;
}

// Assemble the full effective-parameter set. A directly supplied q bypasses
// the p0*phi1^2 product (model-only runs) but is cross-checked to 1% against
// it when both routes are available.
inline EffectiveParams make_effective_params(const CavityParams& cav,
                                             const EnsembleCoupling& ens,
                                             const ProbeConfig& probe,
                                             double oscillator_strength = 2.0 / 3.0,
                                             std::optional<double> q_direct = {}) {
  cav.validate();
  probe.validate();

  EffectiveParams ep;
  const EffectiveCoupling ec = effective_coupling(ens);
  ep.eta_eff = ec.eta_eff;
  ep.n0 = ec.n0;
  ep.s0 = 0.5 * ec.n0;
  ep.phi1 = single_photon_phase(cav, ec.eta_eff, oscillator_strength);
  const double q_from_probe = shearing_strength(ep.s0, probe.p0, ep.phi1);
  if (q_direct) {
    ep.q = *q_direct;
    if (probe.p0 > 0.0 && q_from_probe > 0.0 &&
        std::abs(ep.q - q_from_probe) > 0.01 * std::max(ep.q, q_from_probe))
      throw ConfigError("shearing strength q disagrees with s0*p0*phi1^2 by more than 1%");
  } else {
    ep.q = q_from_probe;
  }
  ep.xi = xi_factor(cav.probe_detuning_fraction);
  ep.gamma_factor = probe.frac_power_var ? gamma_factor(probe.p0, *probe.frac_power_var)
                                         : gamma_of_q(ep.q);
  ep.phase_var = phase_broadening(ep.q, ep.s0);
  return ep;
}

}  // namespace cavspin
