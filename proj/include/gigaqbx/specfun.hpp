#pragma once

// Special functions: Legendre polynomials, associated Legendre functions,
// spherical harmonics and spherical Bessel/Hankel functions.
//
// Spherical harmonics follow
//   Y_n^m(theta, phi) = sqrt((2n+1)/(4 pi) (n-|m|)!/(n+|m|)!) P_n^{|m|}(cos theta) e^{i m phi}
// with the phase-free Ferrers function P_n^m (no Condon-Shortley factor), so
// Y_n^{-m} = conj(Y_n^m) and the Legendre addition theorem
//   P_n(cos g) = 4 pi/(2n+1) sum_m Y_n^m(a) Y_n^{-m}(b)
// holds as written.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "gigaqbx/point.hpp"

namespace gigaqbx::specfun {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDomainSlack = 1e-12;

struct LegendreSeq {
  std::vector<double> values;  // P_0..P_p
  std::vector<double> derivs;  // P_0'..P_p'
};

struct SphBesselSeq {
  std::vector<double> j;
  std::vector<double> jprime;
  std::vector<complex_t> h;
  std::vector<complex_t> hprime;
  double argument = 0.0;
};

inline double clamp_unit(double x) {
  if (!(std::fabs(x) <= 1.0 + kDomainSlack)) {
    throw DomainError("Legendre argument outside [-1, 1]: " + std::to_string(x));
  }
  return std::clamp(x, -1.0, 1.0);
}

/// Fills P_0..P_p and their derivatives at x into caller-provided spans.
/// No allocation; used on the per-pair hot path.
inline void legendre_fill(int p, double x, double* values, double* derivs) {
  values[0] = 1.0;
  derivs[0] = 0.0;
  if (p >= 1) {
    values[1] = x;
    derivs[1] = 1.0;
  }
  for (int n = 1; n < p; ++n) {
    values[n + 1] = ((2 * n + 1) * x * values[n] - n * values[n - 1]) / (n + 1);
    // P'_{n+1} = P'_{n-1} + (2n+1) P_n, regular at x = +-1
    derivs[n + 1] = derivs[n - 1] + (2 * n + 1) * values[n];
  }
}

/// Legendre polynomials P_0..P_p and derivatives at x in [-1, 1].
inline LegendreSeq legendre_all(int p, double x) {
  if (p < 0) throw ValidationError("legendre_all: negative order");
  x = clamp_unit(x);
  LegendreSeq seq;
  seq.values.resize(p + 1);
  seq.derivs.resize(p + 1);
  legendre_fill(p, x, seq.values.data(), seq.derivs.data());
  return seq;
}

/// Unnormalized phase-free Ferrers function P_n^m(x), 0 <= m <= n.
inline double assoc_legendre(int n, int m, double x) {
  if (m < 0 || m > n) throw ValidationError("assoc_legendre: require 0 <= m <= n");
  x = clamp_unit(x);
  const double s = std::sqrt(std::fmax(0.0, (1.0 - x) * (1.0 + x)));
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= (2 * k - 1) * s;
  if (n == m) return pmm;
  double pm1 = x * (2 * m + 1) * pmm;
  if (n == m + 1) return pm1;
  double pm2 = pmm;
  for (int k = m + 2; k <= n; ++k) {
    const double next = ((2 * k - 1) * x * pm1 - (k + m - 1) * pm2) / (k - m);
    pm2 = pm1;
    pm1 = next;
  }
  return pm1;
}

namespace detail {

inline constexpr int tri(int n, int m) { return n * (n + 1) / 2 + m; }

/// Recurrence coefficients for fully normalized associated Legendre functions,
/// computed once for orders up to kMaxOrder.
struct NormalizedLegendreCoeffs {
  static constexpr int kMaxOrder = 160;
  std::vector<double> a, b;        // three-term recurrence in n
  std::vector<double> diag;        // sqrt((2m+1)/(2m))
  std::vector<double> dtheta_lo;   // sqrt((2n+1)(n^2-m^2)/(2n-1))

  NormalizedLegendreCoeffs() {
    const int size = tri(kMaxOrder + 1, 0);
    a.assign(size, 0.0);
    b.assign(size, 0.0);
    dtheta_lo.assign(size, 0.0);
    diag.assign(kMaxOrder + 1, 0.0);
    for (int m = 1; m <= kMaxOrder; ++m) diag[m] = std::sqrt((2.0 * m + 1.0) / (2.0 * m));
    for (int n = 0; n <= kMaxOrder; ++n) {
      for (int m = 0; m <= n; ++m) {
        const double nn = n, mm = m;
        if (n >= m + 2) {
          a[tri(n, m)] = std::sqrt((4.0 * nn * nn - 1.0) / (nn * nn - mm * mm));
          b[tri(n, m)] = std::sqrt(((nn - 1.0) * (nn - 1.0) - mm * mm) / (4.0 * (nn - 1.0) * (nn - 1.0) - 1.0));
        }
        if (n >= 1) dtheta_lo[tri(n, m)] = std::sqrt((2.0 * nn + 1.0) * (nn * nn - mm * mm) / (2.0 * nn - 1.0));
      }
    }
  }

  static const NormalizedLegendreCoeffs& get() {
    static const NormalizedLegendreCoeffs instance;
    return instance;
  }
};

}  // namespace detail

/// Spherical harmonics Y_n^m for every n <= p at one direction, optionally with
/// the angular derivatives needed for gradients. Pole-safe: Y/sin(theta) and
/// dY/dtheta are computed from recurrences that never divide by sin(theta).
class HarmonicTable {
 public:
  /// `dir` need not be unit length; the zero vector maps to theta = phi = 0.
  void compute(int p, const Point3& dir, bool with_derivs = false) {
    if (p > detail::NormalizedLegendreCoeffs::kMaxOrder) {
      throw ValidationError("HarmonicTable: order exceeds supported maximum");
    }
    p_ = p;
    with_derivs_ = with_derivs;
    const double r = norm(dir);
    const double rho = std::hypot(dir.x, dir.y);
    if (r > 0.0) {
      cos_theta_ = std::clamp(dir.z / r, -1.0, 1.0);
      sin_theta_ = rho / r;
    } else {
      cos_theta_ = 1.0;
      sin_theta_ = 0.0;
    }
    complex_t eiphi = rho > 0.0 ? complex_t(dir.x / rho, dir.y / rho) : complex_t(1.0, 0.0);
    cos_phi_ = eiphi.real();
    sin_phi_ = eiphi.imag();

    const int size = detail::tri(p + 1, 0);
    pbar_.assign(size, 0.0);
    eimphi_.resize(p + 1);
    eimphi_[0] = 1.0;
    for (int m = 1; m <= p; ++m) eimphi_[m] = eimphi_[m - 1] * eiphi;

    const auto& c = detail::NormalizedLegendreCoeffs::get();
    const double x = cos_theta_, s = sin_theta_;
    // Q = Pbar / sin(theta) for m >= 1, computed without the sin factor.
    if (with_derivs) qbar_.assign(size, 0.0);
    double pmm = 1.0 / std::sqrt(4.0 * specfun::kPi);
    for (int m = 0; m <= p; ++m) {
      if (m > 0) {
        const double qmm = c.diag[m] * pmm;  // Pbar_m^m / s
        if (with_derivs) qbar_[detail::tri(m, m)] = qmm;
        pmm = qmm * s;
      }
      pbar_[detail::tri(m, m)] = pmm;
      if (m + 1 <= p) pbar_[detail::tri(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
      for (int n = m + 2; n <= p; ++n) {
        const int k = detail::tri(n, m);
        pbar_[k] = c.a[k] * (x * pbar_[detail::tri(n - 1, m)] - c.b[k] * pbar_[detail::tri(n - 2, m)]);
      }
      if (with_derivs && m > 0) {
        const double qmm = qbar_[detail::tri(m, m)];
        if (m + 1 <= p) qbar_[detail::tri(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * qmm;
        for (int n = m + 2; n <= p; ++n) {
          const int k = detail::tri(n, m);
          qbar_[k] = c.a[k] * (x * qbar_[detail::tri(n - 1, m)] - c.b[k] * qbar_[detail::tri(n - 2, m)]);
        }
      }
    }
    if (with_derivs) {
      dbar_.assign(size, 0.0);
      for (int n = 0; n <= p; ++n) {
        // m = 0: dPbar_n^0/dtheta = -sqrt(n(n+1)) Pbar_n^1
        if (n >= 1) dbar_[detail::tri(n, 0)] = -std::sqrt(double(n) * (n + 1)) * pbar_[detail::tri(n, 1)];
        for (int m = 1; m <= n; ++m) {
          const double lo = (n - 1 >= m) ? qbar_[detail::tri(n - 1, m)] : 0.0;
          dbar_[detail::tri(n, m)] = -(c.dtheta_lo[detail::tri(n, m)] * lo - n * x * qbar_[detail::tri(n, m)]);
        }
      }
    }
  }

  int order() const { return p_; }

  complex_t y(int n, int m) const {
    const int am = m < 0 ? -m : m;
    const complex_t v = pbar_[detail::tri(n, am)] * eimphi_[am];
    return m < 0 ? std::conj(v) : v;
  }
  /// dY_n^m/dtheta.
  complex_t dtheta(int n, int m) const {
    const int am = m < 0 ? -m : m;
    const complex_t v = dbar_[detail::tri(n, am)] * eimphi_[am];
    return m < 0 ? std::conj(v) : v;
  }
  /// (1/sin theta) dY_n^m/dphi = i m Y_n^m / sin theta.
  complex_t dphi_over_sin(int n, int m) const {
    if (m == 0) return 0.0;
    const int am = m < 0 ? -m : m;
    complex_t v = qbar_[detail::tri(n, am)] * eimphi_[am];
    if (m < 0) v = std::conj(v);
    return complex_t(0.0, double(m)) * v;
  }

  double cos_theta() const { return cos_theta_; }
  double sin_theta() const { return sin_theta_; }
  Point3 rhat() const { return {sin_theta_ * cos_phi_, sin_theta_ * sin_phi_, cos_theta_}; }
  Point3 theta_hat() const { return {cos_theta_ * cos_phi_, cos_theta_ * sin_phi_, -sin_theta_}; }
  Point3 phi_hat() const { return {-sin_phi_, cos_phi_, 0.0}; }

 private:
  int p_ = -1;
  bool with_derivs_ = false;
  double cos_theta_ = 1.0, sin_theta_ = 0.0, cos_phi_ = 1.0, sin_phi_ = 0.0;
  std::vector<double> pbar_, qbar_, dbar_;
  std::vector<complex_t> eimphi_;
};

/// Y_n^m(theta, phi) with the phase-free convention above.
inline complex_t ynm(int n, int m, double theta, double phi) {
  if (n < 0 || m > n || m < -n) throw ValidationError("ynm: require |m| <= n");
  const int am = m < 0 ? -m : m;
  const double x = clamp_unit(std::cos(theta));
  const double s = std::fabs(std::sin(theta));
  const auto& c = detail::NormalizedLegendreCoeffs::get();
  double pmm = 1.0 / std::sqrt(4.0 * kPi);
  for (int k = 1; k <= am; ++k) pmm *= c.diag[k] * s;
  double value = pmm;
  if (n > am) {
    double p1 = std::sqrt(2.0 * am + 3.0) * x * pmm;
    double p0 = pmm;
    for (int k = am + 2; k <= n; ++k) {
      const int idx = detail::tri(k, am);
      const double next = c.a[idx] * (x * p1 - c.b[idx] * p0);
      p0 = p1;
      p1 = next;
    }
    value = p1;
  }
  return value * std::polar(1.0, m * phi);
}

/// Spherical Bessel j_n (downward Miller recurrence) and Hankel h_n = j_n + i y_n
/// (upward recurrence) for n = 0..p, with derivatives.
inline SphBesselSeq sph_bessel_all(int p, double x) {
  if (p < 0) throw ValidationError("sph_bessel_all: negative order");
  if (!(x > 0.0)) throw DomainError("sph_bessel_all: argument must be positive");
  SphBesselSeq out;
  out.argument = x;
  const int need = p + 1;  // derivatives use order p+1
  const int start = need + 16 + static_cast<int>(std::ceil(x));
  std::vector<double> jj(start + 2, 0.0);
  jj[start + 1] = 0.0;
  jj[start] = 1e-300;
  for (int n = start; n >= 1; --n) {
    jj[n - 1] = (2.0 * n + 1.0) / x * jj[n] - jj[n + 1];
    if (std::fabs(jj[n - 1]) > 1e250) {
      for (int k = n - 1; k <= start; ++k) jj[k] *= 1e-250;
    }
  }
  const double sx = std::sin(x), cx = std::cos(x);
  const double j0 = sx / x;
  const double j1 = sx / (x * x) - cx / x;
  const double scale = (std::fabs(j0) >= std::fabs(j1)) ? j0 / jj[0] : j1 / jj[1];
  std::vector<double> j(need + 1);
  for (int n = 0; n <= need; ++n) j[n] = jj[n] * scale;

  std::vector<double> y(need + 1);
  y[0] = -cx / x;
  if (need >= 1) y[1] = -cx / (x * x) - sx / x;
  for (int n = 1; n < need; ++n) y[n + 1] = (2.0 * n + 1.0) / x * y[n] - y[n - 1];

  out.j.assign(j.begin(), j.begin() + p + 1);
  out.h.resize(p + 1);
  out.jprime.resize(p + 1);
  out.hprime.resize(p + 1);
  for (int n = 0; n <= p; ++n) out.h[n] = complex_t(j[n], y[n]);
  out.jprime[0] = -j[1];
  out.hprime[0] = -complex_t(j[1], y[1]);
  for (int n = 1; n <= p; ++n) {
    out.jprime[n] = j[n - 1] - (n + 1.0) / x * j[n];
    out.hprime[n] = complex_t(j[n - 1], y[n - 1]) - (n + 1.0) / x * out.h[n];
  }
  return out;
}

/// j_n(x)/x for n = 0..p, finite as x -> 0 for n >= 1 (uses
/// j_n(x)/x = (j_{n-1}(x) + j_{n+1}(x))/(2n+1)). Entry 0 is returned as-is
/// (j_0(x)/x) and is only meaningful for x > 0.
inline std::vector<double> sph_bessel_j_over_x(int p, double x) {
  std::vector<double> out(p + 1, 0.0);
  if (x <= 0.0) {
    if (p >= 1) out[1] = 1.0 / 3.0;
    out[0] = 0.0;
    return out;
  }
  const auto seq = sph_bessel_all(p + 1, x);
  out[0] = seq.j[0] / x;
  for (int n = 1; n <= p; ++n) out[n] = (seq.j[n - 1] + seq.j[n + 1]) / (2.0 * n + 1.0);
  return out;
}

}  // namespace gigaqbx::specfun
