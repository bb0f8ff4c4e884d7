#pragma once

// Exact collective-spin states in the symmetric (Dicke) sector: coherent-state
// preparation, rotations, one-axis twisting, collective dephasing, moments,
// and S_z sampling. Amplitudes are stored over m = -S .. +S in ascending
// order; spin may be half-integer (2S is the stored integer).
//
// Rotation convention is right-handed: rotate(state, n, theta) applies
// exp(-i theta n.S). Axis rotations are evaluated in the exact eigenbasis of
// S_x, whose spectrum is known in closed form (m = -S..+S); eigenvectors come
// from inverse iteration on the tridiagonal matrix, so no dense eigensolver
// dependency is needed and unitarity holds to machine precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "cavspin/errors.hpp"
#include "cavspin/quadrature.hpp"
#include "cavspin/rng.hpp"

namespace cavspin {

using cplx = std::complex<double>;

struct SpinQuantum {
  int two_s = 1;  // 2S; S itself may be half-integer

  explicit SpinQuantum(int two_s_) : two_s(two_s_) {
    if (two_s < 1) throw std::invalid_argument("SpinQuantum: 2S must be a positive integer");
  }
  int dim() const { return two_s + 1; }
  double s() const { return 0.5 * two_s; }
  double m_at(int i) const { return -s() + i; }
};

class DickeState {
 public:
  DickeState(SpinQuantum spin, std::vector<cplx> amplitudes)
      : spin_(spin), a_(std::move(amplitudes)) {
    if (int(a_.size()) != spin_.dim())
      throw std::invalid_argument("DickeState: amplitude count must be 2S+1");
    if (std::abs(norm_sq() - 1.0) > 1e-10)
      throw std::invalid_argument("DickeState: amplitudes are not normalized");
  }

  // For internal operations that preserve the norm by construction.
  static DickeState unchecked(SpinQuantum spin, std::vector<cplx> amplitudes) {
    return DickeState(NoCheck{}, spin, std::move(amplitudes));
  }

  const SpinQuantum& spin() const { return spin_; }
  int dim() const { return spin_.dim(); }
  double s() const { return spin_.s(); }
  const std::vector<cplx>& amps() const { return a_; }
  std::vector<cplx>& amps() { return a_; }

  double norm_sq() const {
    double n = 0.0;
    for (const cplx& c : a_) n += std::norm(c);
    return n;
  }

 private:
  struct NoCheck {};
  DickeState(NoCheck, SpinQuantum spin, std::vector<cplx> amplitudes)
      : spin_(spin), a_(std::move(amplitudes)) {}

  SpinQuantum spin_;
  std::vector<cplx> a_;
};

struct SpinMoments {
  std::array<double, 3> mean{};  // <S_x>, <S_y>, <S_z>
  double var_y = 0.0;
  double var_z = 0.0;
  double w = 0.0;  // symmetrized correlation <S_y S_z + S_z S_y>
  double var_x = 0.0;
};

namespace detail {

// S+|m> = A(m)|m+1>
inline double ladder_a(double s, double m) { return std::sqrt((s - m) * (s + m + 1.0)); }

// Eigenbasis of S_x for one spin sector. S_x is real symmetric tridiagonal
// with zero diagonal and off-diagonals A(m)/2; its eigenvalues are exactly
// m = -S..+S, so each eigenvector follows from two rounds of inverse
// iteration with the exact shift (partial-pivot tridiagonal solves, pivots
// floored to keep the intentionally singular system solvable).
class SxEigenbasis {
 public:
  explicit SxEigenbasis(SpinQuantum spin) : spin_(spin), n_(spin.dim()), v_(std::size_t(n_) * n_) {
    build();
  }

  // In place: a <- V exp(-i angle diag(m)) V^T a, i.e. exp(-i angle S_x) a.
  void apply_x_rotation(std::vector<cplx>& a, double angle) const {
    std::vector<cplx> t(n_, cplx(0.0, 0.0));
    for (int i = 0; i < n_; ++i) {
      const double* row = &v_[std::size_t(i) * n_];
      const cplx ai = a[i];
      for (int k = 0; k < n_; ++k) t[k] += row[k] * ai;
    }
    for (int k = 0; k < n_; ++k) {
      const double ph = -angle * spin_.m_at(k);
      t[k] *= cplx(std::cos(ph), std::sin(ph));
    }
    for (int i = 0; i < n_; ++i) {
      const double* row = &v_[std::size_t(i) * n_];
      cplx acc(0.0, 0.0);
      for (int k = 0; k < n_; ++k) acc += row[k] * t[k];
      a[i] = acc;
    }
  }

  const std::vector<double>& matrix() const { return v_; }

 private:
  void build() {
    const double s = spin_.s();
    std::vector<double> off(n_ > 1 ? n_ - 1 : 0);
    for (int i = 0; i + 1 < n_; ++i) off[i] = 0.5 * ladder_a(s, spin_.m_at(i));

    std::vector<double> dl(n_), d(n_), du(n_), du2(n_), x(n_), b(n_);
    const double floor_piv = 1e-280;

    std::uint64_t lcg = 0x2545F4914F6CDD1Dull;
    for (int k = 0; k < n_; ++k) {
      const double lam = spin_.m_at(k);

      // Deterministic pseudo-random start vector.
      double bn = 0.0;
      for (int i = 0; i < n_; ++i) {
        lcg = lcg * 6364136223846793005ull + 1442695040888963407ull;
        b[i] = double(std::int64_t(lcg >> 11)) * 0x1.0p-52 - 1.0;
        bn += b[i] * b[i];
      }
      bn = std::sqrt(bn);
      for (int i = 0; i < n_; ++i) b[i] /= bn;

      for (int pass = 0; pass < 3; ++pass) {
        // LU with partial pivoting of (S_x - lam I); refills per pass.
        for (int i = 0; i < n_; ++i) {
          d[i] = -lam;
          dl[i] = du[i] = du2[i] = 0.0;
        }
        for (int i = 0; i + 1 < n_; ++i) {
          dl[i] = off[i];  // subdiagonal entry in row i+1
          du[i] = off[i];
        }

        for (int i = 0; i + 1 < n_; ++i) {
          if (std::abs(d[i]) >= std::abs(dl[i])) {
            double piv = d[i];
            if (std::abs(piv) < floor_piv) piv = (piv < 0.0 ? -floor_piv : floor_piv);
            d[i] = piv;
            const double f = dl[i] / piv;
            d[i + 1] -= f * du[i];
            if (i + 2 < n_) du[i + 1] -= f * du2[i];
            b[i + 1] -= f * b[i];
          } else {
            const double f = d[i] / dl[i];
            const double od = d[i + 1], odu = (i + 2 < n_) ? du[i + 1] : 0.0;
            d[i] = dl[i];
            const double ndu = od, ndu2 = odu;
            d[i + 1] = du[i] - f * ndu;
            if (i + 2 < n_) du[i + 1] = du2[i] - f * ndu2;
            du[i] = ndu;
            du2[i] = ndu2;
            std::swap(b[i], b[i + 1]);
            b[i + 1] -= f * b[i];
          }
        }
        {
          double piv = d[n_ - 1];
          if (std::abs(piv) < floor_piv) piv = (piv < 0.0 ? -floor_piv : floor_piv);
          x[n_ - 1] = b[n_ - 1] / piv;
        }
        if (n_ > 1) x[n_ - 2] = (b[n_ - 2] - du[n_ - 2] * x[n_ - 1]) / d[n_ - 2];
        for (int i = n_ - 3; i >= 0; --i)
          x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];

        // Rescale by the largest component before the norm: solutions of the
        // near-singular system can exceed 1e280, whose square overflows.
        double xmax = 0.0;
        for (int i = 0; i < n_; ++i) xmax = std::max(xmax, std::abs(x[i]));
        if (!(xmax > 0.0) || !std::isfinite(xmax))
          throw NumericalError("SxEigenbasis: inverse iteration produced a degenerate vector");
        double xn = 0.0;
        for (int i = 0; i < n_; ++i) {
          const double t = x[i] / xmax;
          xn += t * t;
        }
        xn = std::sqrt(xn);
        for (int i = 0; i < n_; ++i) b[i] = (x[i] / xmax) / xn;
      }

      // Deterministic sign: largest-magnitude component positive.
      int imax = 0;
      for (int i = 1; i < n_; ++i)
        if (std::abs(b[i]) > std::abs(b[imax])) imax = i;
      const double sgn = b[imax] < 0.0 ? -1.0 : 1.0;
      for (int i = 0; i < n_; ++i) v_[std::size_t(i) * n_ + k] = sgn * b[i];
    }
  }

  SpinQuantum spin_;
  int n_;
  std::vector<double> v_;  // row-major; column k is the eigenvector for m_k
};

struct RawMoments {
  double sx = 0, sy = 0, sz = 0;
  double sx2 = 0, sy2 = 0, sz2 = 0;
  double syz = 0;  // <S_y S_z + S_z S_y>
};

inline RawMoments raw_moments(const DickeState& st) {
  const int n = st.dim();
  const double s = st.s();
  const std::vector<cplx>& a = st.amps();

  // Ladder action: (S+ a) lands one slot up, (S- a) one slot down.
  std::vector<cplx> xv(n, cplx(0, 0)), yv(n, cplx(0, 0)), zv(n);
  for (int i = 0; i < n; ++i) {
    const double m = st.spin().m_at(i);
    zv[i] = m * a[i];
    if (i + 1 < n) {
      const double am = ladder_a(s, m);  // couples m and m+1
      xv[i + 1] += 0.5 * am * a[i];
      yv[i + 1] += cplx(0.0, -0.5) * am * a[i];  // (S+ - S-)/(2i)
      xv[i] += 0.5 * am * a[i + 1];
      yv[i] += cplx(0.0, 0.5) * am * a[i + 1];
    }
  }

  RawMoments r;
  for (int i = 0; i < n; ++i) {
    const cplx ai = std::conj(a[i]);
    r.sx += (ai * xv[i]).real();
    r.sy += (ai * yv[i]).real();
    r.sz += (ai * zv[i]).real();
    r.sx2 += std::norm(xv[i]);
    r.sy2 += std::norm(yv[i]);
    r.sz2 += std::norm(zv[i]);
    r.syz += 2.0 * (std::conj(yv[i]) * zv[i]).real();
  }
  return r;
}

inline SpinMoments assemble(const RawMoments& r) {
  SpinMoments m;
  m.mean = {r.sx, r.sy, r.sz};
  m.var_x = r.sx2 - r.sx * r.sx;
  m.var_y = r.sy2 - r.sy * r.sy;
  m.var_z = r.sz2 - r.sz * r.sz;
  m.w = r.syz;
  return m;
}

}  // namespace detail

// Coherent spin state |polar, azimuth>: all constituent spins along the unit
// vector with the given spherical angles. Amplitudes follow the binomial
// closed form, evaluated in log space so large S stays accurate.
inline DickeState css_state(SpinQuantum spin, double polar, double azimuth) {
  if (!(polar >= 0.0 && polar <= 3.14159265358979324))
    throw std::invalid_argument("css_state: polar angle must lie in [0, pi]");
  const int n = spin.dim();
  std::vector<cplx> a(n, cplx(0, 0));
  const double c = std::cos(0.5 * polar), sn = std::sin(0.5 * polar);
  if (sn == 0.0) {
    a[n - 1] = 1.0;  // polar = 0: everything in m = +S
  } else if (c == 0.0) {
    a[0] = 1.0;  // polar = pi: m = -S
  } else {
    const double l2s = std::lgamma(spin.two_s + 1.0);
    const double lc = std::log(c), ls = std::log(sn);
    for (int i = 0; i < n; ++i) {
      // i = S + m
      const double logmag = 0.5 * (l2s - std::lgamma(i + 1.0) - std::lgamma(spin.two_s - i + 1.0)) +
                            i * lc + (spin.two_s - i) * ls;
      const double mag = std::exp(logmag);
      const double ph = -azimuth * i;
      a[i] = mag * cplx(std::cos(ph), std::sin(ph));
    }
  }
  return DickeState(spin, std::move(a));
}

// exp(-i angle n.S) |state>. The axis must be unit length to 1e-9.
inline DickeState rotate(const DickeState& state, const std::array<double, 3>& axis, double angle) {
  const double nrm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (std::abs(nrm - 1.0) > 1e-9)
    throw std::invalid_argument("rotate: axis must be a unit vector");
  const double ax = axis[0] / nrm, ay = axis[1] / nrm, az = axis[2] / nrm;
  const int n = state.dim();
  std::vector<cplx> a = state.amps();

  auto z_phase = [&](double theta) {
    // exp(-i theta S_z): diagonal
    for (int i = 0; i < n; ++i) {
      const double ph = -theta * state.spin().m_at(i);
      a[i] *= cplx(std::cos(ph), std::sin(ph));
    }
  };

  const double rho = std::hypot(ax, ay);
  if (rho < 1e-12) {
    z_phase(az > 0.0 ? angle : -angle);
    return DickeState::unchecked(state.spin(), std::move(a));
  }

  const detail::SxEigenbasis basis(state.spin());
  const double gamma = std::atan2(ay, ax);
  if (std::abs(az) < 1e-12) {
    // In-plane axis: n.S = Rz(gamma) S_x Rz(-gamma)
    z_phase(-gamma);
    basis.apply_x_rotation(a, angle);
    z_phase(gamma);
    return DickeState::unchecked(state.spin(), std::move(a));
  }

  // General axis, z-y-z Euler split: n = Rz(gamma) Ry(beta) z and
  // exp(-i b S_y) = Rz(pi/2) exp(-i b S_x) Rz(-pi/2).
  const double beta = std::atan2(rho, az);
  const double half_pi = 1.5707963267948966;
  z_phase(-gamma - half_pi);
  basis.apply_x_rotation(a, -beta);
  z_phase(angle);
  basis.apply_x_rotation(a, beta);
  z_phase(gamma + half_pi);
  return DickeState::unchecked(state.spin(), std::move(a));
}

// One-axis twisting exp(-i theta S_z^2): phase m^2 per amplitude.
inline DickeState twist(const DickeState& state, double theta) {
  std::vector<cplx> a = state.amps();
  for (int i = 0; i < state.dim(); ++i) {
    const double m = state.spin().m_at(i);
    const double ph = -theta * m * m;
    a[i] *= cplx(std::cos(ph), std::sin(ph));
  }
  return DickeState::unchecked(state.spin(), std::move(a));
}

inline SpinMoments measure_moments(const DickeState& state) {
  return detail::assemble(detail::raw_moments(state));
}

// Moments of the mixed state obtained by averaging exp(-i phi S_z)|state>
// over phi ~ N(0, variance). Gauss-Hermite average of the raw moments; the
// default order is exact (below 1e-9) for every variance used here.
inline SpinMoments dephase(const DickeState& state, double variance, int order = kDephaseOrder) {
  if (variance < 0.0) throw std::invalid_argument("dephase: variance must be >= 0");
  const QuadratureRule rule = phase_average_rule(variance, order);
  const int n = state.dim();
  std::vector<cplx> rot(n);
  detail::RawMoments acc;
  for (int k = 0; k < order; ++k) {
    const double phi = rule.nodes[k], wk = rule.weights[k];
    for (int i = 0; i < n; ++i) {
      const double ph = -phi * state.spin().m_at(i);
      rot[i] = state.amps()[i] * cplx(std::cos(ph), std::sin(ph));
    }
    const detail::RawMoments r =
        detail::raw_moments(DickeState::unchecked(state.spin(), rot));
    acc.sx += wk * r.sx;
    acc.sy += wk * r.sy;
    acc.sz += wk * r.sz;
    acc.sx2 += wk * r.sx2;
    acc.sy2 += wk * r.sy2;
    acc.sz2 += wk * r.sz2;
    acc.syz += wk * r.syz;
  }
  return detail::assemble(acc);
}

// Projective S_z sampling. Build once per state when drawing repeatedly.
class SzSampler {
 public:
  explicit SzSampler(const DickeState& state) : spin_(state.spin()), cdf_(state.dim()) {
    double acc = 0.0;
    for (int i = 0; i < state.dim(); ++i) {
      acc += std::norm(state.amps()[i]);
      cdf_[i] = acc;
    }
    total_ = acc;
  }

  double operator()(std::mt19937_64& g) const {
    const double u = uniform_draw(g) * total_;
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    const int idx = std::min(int(it - cdf_.begin()), int(cdf_.size()) - 1);
    return spin_.m_at(idx);
  }

 private:
  SpinQuantum spin_;
  std::vector<double> cdf_;
  double total_ = 1.0;
};

inline double sample_sz(const DickeState& state, std::mt19937_64& g) {
  return SzSampler(state)(g);
}

}  // namespace cavspin
