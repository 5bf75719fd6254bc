#pragma once

// Spherical-harmonic multipole and local expansions.
//
// Stored coefficients use the convention
//   local:     L_n^m = sum_j w_j/(2n+1) Y_n^{-m}(s_j - c) / |s_j - c|^{n+1},  u(t) = sum L_n^m |t-c|^n Y_n^m
//   multipole: M_n^m = sum_j w_j/(2n+1) |s_j - c|^n Y_n^{-m}(s_j - c),      u(t) = sum M_n^m Y_n^m / |t-c|^{n+1}
// which reproduces G = 1/(4 pi r). Helmholtz locals use
//   L_n^m = sum_j w_j i k h_n(k|s_j-c|) Y_n^{-m}(s_j - c),  u(t) = sum L_n^m j_n(k|t-c|) Y_n^m.
//
// Translations work on Racah-normalized solid harmonics
//   R_n^m(x) = sqrt(4 pi/(2n+1)) r^n Ycs_n^m,   I_n^m(x) = sqrt(4 pi/(2n+1)) Ycs_n^m / r^{n+1}
// (Condon-Shortley phase), for which 1/|x-y| = sum conj(R_n^m(y)) I_n^m(x). Since
// Y_n^m = eps_m Ycs_n^m with eps_m = (-1)^m for m >= 0 and 1 for m < 0, the
// stored coefficients map to Racah ones by the diagonal factor eps_m sqrt((2n+1)/(4 pi)).

#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gigaqbx/kernels.hpp"
#include "gigaqbx/point.hpp"
#include "gigaqbx/specfun.hpp"

namespace gigaqbx {

enum class ExpansionKind { Multipole, Local };

/// Dense (n, m) coefficients, |m| <= n <= order, m-major within n.
struct CoefficientVector {
  int order = 0;
  Point3 center{};
  ExpansionKind kind = ExpansionKind::Local;
  Equation equation = Equation::Laplace;
  double helmholtz_k = 0.0;
  std::vector<complex_t> coeffs;

  CoefficientVector() = default;
  CoefficientVector(int p, const Point3& c, ExpansionKind k, Equation eq = Equation::Laplace, double hk = 0.0)
      : order(p), center(c), kind(k), equation(eq), helmholtz_k(hk), coeffs(size_for(p), 0.0) {}

  static constexpr int size_for(int p) { return (p + 1) * (p + 1); }
  static constexpr int index(int n, int m) { return n * n + n + m; }

  complex_t& at(int n, int m) { return coeffs[index(n, m)]; }
  const complex_t& at(int n, int m) const { return coeffs[index(n, m)]; }

  CoefficientVector& operator+=(const CoefficientVector& o) {
    if (o.order != order || o.kind != kind) throw ValidationError("adding incompatible expansions");
    for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += o.coeffs[i];
    return *this;
  }
};

/// Weighted point sources. `normals` is read only for dipole (double-layer)
/// sources and may otherwise be empty.
struct PointSources {
  std::span<const Point3> points;
  std::span<const complex_t> weights;
  std::span<const Point3> normals;
};

namespace detail {

inline constexpr int cidx(int n, int m) { return n * n + n + m; }
inline double eps(int m) { return (m >= 0 && (m & 1)) ? -1.0 : 1.0; }

/// Gradient of f(r) Y(theta, phi) from the radial factor and the angular
/// derivatives stored in `tab` (which must be computed with derivatives).
inline CPoint3 radial_angular_gradient(const specfun::HarmonicTable& tab, int n, int m, complex_t f_prime,
                                       complex_t f_over_r) {
  const complex_t y = tab.y(n, m);
  const complex_t dth = tab.dtheta(n, m);
  const complex_t dph = tab.dphi_over_sin(n, m);
  const Point3 rh = tab.rhat(), th = tab.theta_hat(), ph = tab.phi_hat();
  const complex_t a = f_prime * y, b = f_over_r * dth, c = f_over_r * dph;
  return {a * rh.x + b * th.x + c * ph.x, a * rh.y + b * th.y + c * ph.y, a * rh.z + b * th.z + c * ph.z};
}

/// Values of j_n(k r), j_n'(k r), j_n(k r)/(k r) for n <= p, including r = 0.
struct BesselJRow {
  std::vector<double> j, jp, j_over_x;
  void compute(int p, double x) {
    j.assign(p + 1, 0.0);
    jp.assign(p + 1, 0.0);
    j_over_x.assign(p + 1, 0.0);
    if (x <= 0.0) {
      j[0] = 1.0;
      if (p >= 1) {
        jp[1] = 1.0 / 3.0;
        j_over_x[1] = 1.0 / 3.0;
      }
      return;
    }
    const auto seq = specfun::sph_bessel_all(p + 1, x);
    for (int n = 0; n <= p; ++n) {
      j[n] = seq.j[n];
      jp[n] = seq.jprime[n];
      j_over_x[n] = n == 0 ? seq.j[0] / x : (seq.j[n - 1] + seq.j[n + 1]) / (2.0 * n + 1.0);
    }
  }
};

/// Racah solid harmonics R_n^m(x) for n <= p (dense (n, m) layout).
inline void regular_solid(int p, const Point3& x, std::vector<complex_t>& out, specfun::HarmonicTable& tab) {
  out.assign(CoefficientVector::size_for(p), 0.0);
  tab.compute(p, x);
  const double r = norm(x);
  double rn = 1.0;
  for (int n = 0; n <= p; ++n) {
    const double scale = std::sqrt(4.0 * kPi / (2.0 * n + 1.0)) * rn;
    for (int m = -n; m <= n; ++m) out[cidx(n, m)] = eps(m) * scale * tab.y(n, m);
    rn *= r;
  }
}

/// Racah solid harmonics I_n^m(x) for n <= p; x must be nonzero.
inline void irregular_solid(int p, const Point3& x, std::vector<complex_t>& out, specfun::HarmonicTable& tab) {
  out.assign(CoefficientVector::size_for(p), 0.0);
  tab.compute(p, x);
  const double r = norm(x);
  double rinv = 1.0 / r;
  for (int n = 0; n <= p; ++n) {
    const double scale = std::sqrt(4.0 * kPi / (2.0 * n + 1.0)) * rinv;
    for (int m = -n; m <= n; ++m) out[cidx(n, m)] = eps(m) * scale * tab.y(n, m);
    rinv /= r;
  }
}

inline double to_racah_factor(int n, int m) { return eps(m) * std::sqrt((2.0 * n + 1.0) / (4.0 * kPi)); }

inline std::vector<complex_t> to_racah(const CoefficientVector& v) {
  std::vector<complex_t> q(v.coeffs.size());
  for (int n = 0; n <= v.order; ++n)
    for (int m = -n; m <= n; ++m) q[cidx(n, m)] = to_racah_factor(n, m) * v.coeffs[cidx(n, m)];
  return q;
}

inline void from_racah(const std::vector<complex_t>& q, CoefficientVector& v) {
  for (int n = 0; n <= v.order; ++n)
    for (int m = -n; m <= n; ++m) v.coeffs[cidx(n, m)] = q[cidx(n, m)] / to_racah_factor(n, m);
}

inline double binomial(int a, int b) {
  if (b < 0 || a < 0 || b > a) return 0.0;
  b = std::min(b, a - b);
  double out = 1.0;
  for (int i = 1; i <= b; ++i) out = out * (a - b + i) / i;
  return std::round(out);
}

/// sqrt(binom(l+m, lam+mu) binom(l-m, lam-mu)), the regular addition coefficient.
inline double addition_coeff(int l, int m, int lam, int mu) {
  return std::sqrt(binomial(l + m, lam + mu) * binomial(l - m, lam - mu));
}

/// Immutable coefficient tables keyed by orders, built once and shared.
template <class Table>
const Table& cached_table(int a, int b) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<Table>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{a, b}];
  if (!slot) slot = std::make_unique<Table>(a, b);
  return *slot;
}

/// Shift table for M2M/L2L: entry for (l, m, lam, mu) with |m - mu| <= l - lam.
struct ShiftTable {
  struct Term {
    int out, in, shift;
    double coeff;
  };
  std::vector<Term> m2m, l2l;
  ShiftTable(int p_in, int p_out) {
    // M2M: Q'_l^m = sum C(l,m,lam,mu) conj(R_lam^mu(d)) Q_{l-lam}^{m-mu}
    for (int l = 0; l <= p_out; ++l)
      for (int m = -l; m <= l; ++m)
        for (int lam = 0; lam <= l; ++lam) {
          if (l - lam > p_in) continue;
          for (int mu = -lam; mu <= lam; ++mu) {
            if (std::abs(m - mu) > l - lam) continue;
            m2m.push_back({cidx(l, m), cidx(l - lam, m - mu), cidx(lam, mu), addition_coeff(l, m, lam, mu)});
          }
        }
    // L2L: L'_lam^mu = sum_{l >= lam} L_l^m C(l,m,lam,mu) R_{l-lam}^{m-mu}(d)
    for (int lam = 0; lam <= p_out; ++lam)
      for (int mu = -lam; mu <= lam; ++mu)
        for (int l = lam; l <= p_in; ++l)
          for (int m = -l; m <= l; ++m) {
            if (std::abs(m - mu) > l - lam) continue;
            l2l.push_back({cidx(lam, mu), cidx(l, m), cidx(l - lam, m - mu), addition_coeff(l, m, lam, mu)});
          }
  }
};

/// M2L table: for each output (j, k) and input (lam, nu), the signed coefficient
/// (-1)^(lam+nu) sqrt(binom(j+lam+k-nu, lam-nu) binom(j+lam-k+nu, lam+nu)).
struct M2LTable {
  int p_src, p_tgt;
  std::vector<double> coeff;  // [(j,k)][(lam,nu)]
  M2LTable(int ps, int pt) : p_src(ps), p_tgt(pt) {
    const int ns = CoefficientVector::size_for(ps);
    coeff.assign(static_cast<std::size_t>(CoefficientVector::size_for(pt)) * ns, 0.0);
    for (int j = 0; j <= pt; ++j)
      for (int k = -j; k <= j; ++k)
        for (int lam = 0; lam <= ps; ++lam)
          for (int nu = -lam; nu <= lam; ++nu) {
            const double sign = ((lam + nu) & 1) ? -1.0 : 1.0;
            coeff[static_cast<std::size_t>(cidx(j, k)) * ns + cidx(lam, nu)] =
                sign * std::sqrt(binomial(j + lam + k - nu, lam - nu) * binomial(j + lam - k + nu, lam + nu));
          }
  }
};

inline void require_laplace(const CoefficientVector& v, const char* op) {
  if (v.equation != Equation::Laplace) throw ValidationError(std::string(op) + ": only Laplace translations are supported");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Formation

/// Accumulates one source into a local expansion. `dipole` selects a
/// source-normal-derivative strength along `sn`.
inline void p2l_accumulate(CoefficientVector& L, const Point3& s, complex_t w, const Point3& sn, bool dipole,
                           specfun::HarmonicTable& tab) {
  const Point3 d = s - L.center;
  const double R = norm(d);
  if (R == 0.0) throw SingularPairError("p2l: source coincides with expansion center", 0, 0);
  const int p = L.order;
  tab.compute(p, d, dipole);
  if (L.equation == Equation::Laplace) {
    double rinv = 1.0 / R;  // R^{-(n+1)}
    for (int n = 0; n <= p; ++n) {
      const double inv2n1 = 1.0 / (2.0 * n + 1.0);
      for (int m = -n; m <= n; ++m) {
        if (!dipole) {
          L.coeffs[detail::cidx(n, m)] += w * inv2n1 * rinv * tab.y(n, -m);
        } else {
          // grad_s [Y_n^{-m} R^{-(n+1)}]: f' = -(n+1) R^{-(n+2)}, f/R = R^{-(n+2)}
          const double f_over_r = rinv / R;
          const CPoint3 g = detail::radial_angular_gradient(tab, n, -m, -(n + 1.0) * f_over_r, f_over_r);
          L.coeffs[detail::cidx(n, m)] += w * inv2n1 * dot(g, sn);
        }
      }
      rinv /= R;
    }
    return;
  }
  const double k = L.helmholtz_k;
  const auto seq = specfun::sph_bessel_all(p, k * R);
  const complex_t ik(0.0, k);
  for (int n = 0; n <= p; ++n) {
    for (int m = -n; m <= n; ++m) {
      if (!dipole) {
        L.coeffs[detail::cidx(n, m)] += w * ik * seq.h[n] * tab.y(n, -m);
      } else {
        const CPoint3 g = detail::radial_angular_gradient(tab, n, -m, k * seq.hprime[n], seq.h[n] / R);
        L.coeffs[detail::cidx(n, m)] += w * ik * dot(g, sn);
      }
    }
  }
}

/// Local expansion of `src` about `center`. `spec` selects the equation and
/// whether sources are dipoles (SourceNormalDeriv); other variants form
/// monopole expansions.
inline CoefficientVector p2l(const PointSources& src, const Point3& center, int p,
                             const KernelSpec& spec = KernelSpec::laplace()) {
  spec.validate();
  if (p < 0) throw ValidationError("p2l: negative order");
  const bool dipole = spec.needs_source_normal();
  if (src.weights.size() != src.points.size()) throw ValidationError("p2l: weights/sources length mismatch");
  if (dipole && src.normals.size() != src.points.size()) throw ValidationError("p2l: source normals required");
  CoefficientVector L(p, center, ExpansionKind::Local, spec.equation, spec.helmholtz_k);
  specfun::HarmonicTable tab;
  for (std::size_t j = 0; j < src.points.size(); ++j) {
    if (src.points[j] == center) throw SingularPairError("p2l: source coincides with expansion center", 0, j);
    p2l_accumulate(L, src.points[j], src.weights[j], dipole ? src.normals[j] : Point3{}, dipole, tab);
  }
  return L;
}

/// Accumulates one Laplace source into a multipole expansion.
inline void p2m_accumulate(CoefficientVector& M, const Point3& s, complex_t w, const Point3& sn, bool dipole,
                           specfun::HarmonicTable& tab) {
  const Point3 d = s - M.center;
  const double rho = norm(d);
  const int p = M.order;
  tab.compute(p, d, dipole);
  double rn = 1.0;  // rho^n
  double rnm1 = 0.0;  // rho^{n-1}, with 0^0 = 1
  for (int n = 0; n <= p; ++n) {
    const double inv2n1 = 1.0 / (2.0 * n + 1.0);
    for (int m = -n; m <= n; ++m) {
      if (!dipole) {
        M.coeffs[detail::cidx(n, m)] += w * inv2n1 * rn * tab.y(n, -m);
      } else if (n > 0) {
        // grad_s [rho^n Y_n^{-m}]: f' = n rho^{n-1}, f/rho = rho^{n-1}
        const CPoint3 g = detail::radial_angular_gradient(tab, n, -m, n * rnm1, rnm1);
        M.coeffs[detail::cidx(n, m)] += w * inv2n1 * dot(g, sn);
      }
    }
    rnm1 = rn;
    rn *= rho;
  }
}

/// Laplace multipole expansion of `src` about `center`.
inline CoefficientVector p2m(const PointSources& src, const Point3& center, int p,
                             const KernelSpec& spec = KernelSpec::laplace()) {
  if (spec.equation != Equation::Laplace) throw ValidationError("p2m: only Laplace multipoles are supported");
  if (p < 0) throw ValidationError("p2m: negative order");
  const bool dipole = spec.needs_source_normal();
  if (src.weights.size() != src.points.size()) throw ValidationError("p2m: weights/sources length mismatch");
  if (dipole && src.normals.size() != src.points.size()) throw ValidationError("p2m: source normals required");
  CoefficientVector M(p, center, ExpansionKind::Multipole);
  specfun::HarmonicTable tab;
  for (std::size_t j = 0; j < src.points.size(); ++j) {
    p2m_accumulate(M, src.points[j], src.weights[j], dipole ? src.normals[j] : Point3{}, dipole, tab);
  }
  return M;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Value of a local expansion at `target`, or its derivative along
/// `target_normal` when `normal_derivative` is set.
inline complex_t eval_local(const CoefficientVector& L, const Point3& target, bool normal_derivative,
                            const Point3& target_normal, specfun::HarmonicTable& tab) {
  const Point3 d = target - L.center;
  const double r = norm(d);
  const int p = L.order;
  tab.compute(p, d, normal_derivative);
  complex_t acc = 0.0;
  if (L.equation == Equation::Laplace) {
    double rn = 1.0, rnm1 = 0.0;
    for (int n = 0; n <= p; ++n) {
      for (int m = -n; m <= n; ++m) {
        const complex_t c = L.coeffs[detail::cidx(n, m)];
        if (!normal_derivative) {
          acc += c * rn * tab.y(n, m);
        } else if (n > 0) {
          acc += c * dot(detail::radial_angular_gradient(tab, n, m, n * rnm1, rnm1), target_normal);
        }
      }
      rnm1 = rn;
      rn *= r;
    }
    return acc;
  }
  const double k = L.helmholtz_k;
  detail::BesselJRow row;
  row.compute(p, k * r);
  for (int n = 0; n <= p; ++n) {
    for (int m = -n; m <= n; ++m) {
      const complex_t c = L.coeffs[detail::cidx(n, m)];
      if (!normal_derivative) {
        acc += c * row.j[n] * tab.y(n, m);
      } else {
        // d/dr j_n(kr) = k j_n', and j_n(kr)/r = k j_n(kr)/(kr)
        acc += c * dot(detail::radial_angular_gradient(tab, n, m, k * row.jp[n], k * row.j_over_x[n]), target_normal);
      }
    }
  }
  return acc;
}

inline complex_t eval_local(const CoefficientVector& L, const Point3& target) {
  specfun::HarmonicTable tab;
  return eval_local(L, target, false, Point3{}, tab);
}

inline complex_t eval_local(const CoefficientVector& L, const Point3& target, const KernelSpec& spec,
                            const Point3& target_normal = {}) {
  specfun::HarmonicTable tab;
  return eval_local(L, target, spec.needs_target_normal(), target_normal, tab);
}

/// Value (or normal derivative) of a Laplace multipole expansion at `target`.
inline complex_t eval_multipole(const CoefficientVector& M, const Point3& target, bool normal_derivative,
                                const Point3& target_normal, specfun::HarmonicTable& tab) {
  const Point3 d = target - M.center;
  const double r = norm(d);
  const int p = M.order;
  tab.compute(p, d, normal_derivative);
  complex_t acc = 0.0;
  double rinv = 1.0 / r;  // r^{-(n+1)}
  for (int n = 0; n <= p; ++n) {
    for (int m = -n; m <= n; ++m) {
      const complex_t c = M.coeffs[detail::cidx(n, m)];
      if (!normal_derivative) {
        acc += c * rinv * tab.y(n, m);
      } else {
        const double f_over_r = rinv / r;
        acc += c * dot(detail::radial_angular_gradient(tab, n, m, -(n + 1.0) * f_over_r, f_over_r), target_normal);
      }
    }
    rinv /= r;
  }
  return acc;
}

inline complex_t eval_multipole(const CoefficientVector& M, const Point3& target) {
  specfun::HarmonicTable tab;
  return eval_multipole(M, target, false, Point3{}, tab);
}

inline complex_t eval_multipole(const CoefficientVector& M, const Point3& target, const KernelSpec& spec,
                                const Point3& target_normal = {}) {
  specfun::HarmonicTable tab;
  return eval_multipole(M, target, spec.needs_target_normal(), target_normal, tab);
}

// ---------------------------------------------------------------------------
// Translations (Laplace only)

/// Shifts a multipole expansion to `new_center`, output order `p`.
inline CoefficientVector m2m(const CoefficientVector& M, const Point3& new_center, int p) {
  detail::require_laplace(M, "m2m");
  const auto& table = detail::cached_table<detail::ShiftTable>(M.order, p);
  const auto q = detail::to_racah(M);
  specfun::HarmonicTable tab;
  std::vector<complex_t> R;
  detail::regular_solid(p, M.center - new_center, R, tab);
  std::vector<complex_t> out(CoefficientVector::size_for(p), 0.0);
  for (const auto& t : table.m2m) out[t.out] += t.coeff * std::conj(R[t.shift]) * q[t.in];
  CoefficientVector res(p, new_center, ExpansionKind::Multipole);
  detail::from_racah(out, res);
  return res;
}

/// Multipole of order p_src to local of order p_tgt about `local_center`.
inline CoefficientVector m2l(const CoefficientVector& M, const Point3& local_center, int p_src, int p_tgt) {
  detail::require_laplace(M, "m2l");
  if (p_src > M.order) throw ValidationError("m2l: source order exceeds expansion order");
  const auto& table = detail::cached_table<detail::M2LTable>(p_src, p_tgt);
  CoefficientVector trunc = M;
  trunc.order = p_src;
  trunc.coeffs.resize(CoefficientVector::size_for(p_src));
  const auto q = detail::to_racah(trunc);
  specfun::HarmonicTable tab;
  std::vector<complex_t> I;
  detail::irregular_solid(p_src + p_tgt, M.center - local_center, I, tab);
  for (auto& v : I) v = std::conj(v);
  const int ns = CoefficientVector::size_for(p_src);
  std::vector<complex_t> out(CoefficientVector::size_for(p_tgt), 0.0);
  for (int j = 0; j <= p_tgt; ++j) {
    for (int k = -j; k <= j; ++k) {
      const double* row = &table.coeff[static_cast<std::size_t>(detail::cidx(j, k)) * ns];
      complex_t acc = 0.0;
      for (int lam = 0; lam <= p_src; ++lam) {
        const int base = (j + lam) * (j + lam) + (j + lam) + k;  // cidx(j+lam, k-nu) = base - nu
        const int qb = lam * lam + lam;
        for (int nu = -lam; nu <= lam; ++nu) acc += row[qb + nu] * q[qb + nu] * I[base - nu];
      }
      out[detail::cidx(j, k)] = acc;
    }
  }
  CoefficientVector res(p_tgt, local_center, ExpansionKind::Local);
  detail::from_racah(out, res);
  return res;
}

/// Shifts a local expansion to `new_center`, output order `p`.
inline CoefficientVector l2l(const CoefficientVector& L, const Point3& new_center, int p) {
  detail::require_laplace(L, "l2l");
  const auto& table = detail::cached_table<detail::ShiftTable>(L.order, p);
  const auto q = detail::to_racah(L);
  specfun::HarmonicTable tab;
  std::vector<complex_t> R;
  detail::regular_solid(L.order, new_center - L.center, R, tab);
  std::vector<complex_t> out(CoefficientVector::size_for(p), 0.0);
  for (const auto& t : table.l2l) out[t.out] += t.coeff * R[t.shift] * q[t.in];
  CoefficientVector res(p, new_center, ExpansionKind::Local);
  detail::from_racah(out, res);
  return res;
}

/// Box local (order p_fmm) to QBX local (order p_qbx) about `qbx_center`.
inline CoefficientVector l2qbxl(const CoefficientVector& L, const Point3& qbx_center, int p_fmm, int p_qbx) {
  if (L.order != p_fmm) throw ValidationError("l2qbxl: expansion order does not match p_fmm");
  return l2l(L, qbx_center, p_qbx);
}

/// Box multipole (order p_fmm) to QBX local (order p_qbx) about `qbx_center`.
inline CoefficientVector m2qbxl(const CoefficientVector& M, const Point3& qbx_center, int p_fmm, int p_qbx) {
  return m2l(M, qbx_center, p_fmm, p_qbx);
}

// ---------------------------------------------------------------------------
// Dump format: header "p <p> center <x> <y> <z> kind <M|L>", then "n m re im".

inline void write_expansion(std::ostream& os, const CoefficientVector& v) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "p " << v.order << " center " << v.center.x << ' ' << v.center.y << ' ' << v.center.z << " kind "
      << (v.kind == ExpansionKind::Multipole ? 'M' : 'L') << '\n';
  for (int n = 0; n <= v.order; ++n)
    for (int m = -n; m <= n; ++m) {
      const complex_t c = v.at(n, m);
      buf << n << ' ' << m << ' ' << c.real() << ' ' << c.imag() << '\n';
    }
  os << buf.str();
}

inline CoefficientVector read_expansion(std::istream& is) {
  std::string tag_p, tag_c, tag_k;
  char kind = 0;
  CoefficientVector v;
  if (!(is >> tag_p >> v.order >> tag_c >> v.center.x >> v.center.y >> v.center.z >> tag_k >> kind) ||
      tag_p != "p" || tag_c != "center" || tag_k != "kind" || (kind != 'M' && kind != 'L') || v.order < 0) {
    throw ValidationError("malformed expansion header");
  }
  v.kind = kind == 'M' ? ExpansionKind::Multipole : ExpansionKind::Local;
  v.coeffs.assign(CoefficientVector::size_for(v.order), 0.0);
  for (int i = 0; i < CoefficientVector::size_for(v.order); ++i) {
    int n, m;
    double re, im;
    if (!(is >> n >> m >> re >> im) || n < 0 || n > v.order || std::abs(m) > n) {
      throw ValidationError("malformed expansion coefficient line");
    }
    v.at(n, m) = {re, im};
  }
  return v;
}

}  // namespace gigaqbx
