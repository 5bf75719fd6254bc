#pragma once

// Target-specific QBX expansions. For a source s, center c and target t with
// r = |t - c| <= R = |s - c| and gamma the angle between s - c and t - c:
//   Laplace:   G^(p)   = 1/(4 pi) sum_{n<=p} r^n / R^{n+1} P_n(cos gamma)
//   Helmholtz: G_k^(p) = ik/(4 pi) sum_{n<=p} (2n+1) j_n(kr) h_n(kR) P_n(cos gamma)
// plus their target and source gradients dotted with the relevant normal.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "gigaqbx/kernels.hpp"
#include "gigaqbx/point.hpp"
#include "gigaqbx/specfun.hpp"

namespace gigaqbx {

struct TsConfig {
  KernelSpec spec;
  int p_qbx = 0;
};

/// Reusable scratch for per-pair Legendre/Bessel sequences.
struct TsWorkspace {
  std::vector<double> pn, dpn, jn, jpn, jox;
  void reserve(int p) {
    pn.resize(p + 2);
    dpn.resize(p + 2);
  }
};

namespace detail {

/// One source-target pair without precondition checks. Degenerate r = 0 uses
/// t_hat := s_hat so cos(gamma) = 1; every n >= 1 term that depends on the
/// direction then vanishes or reduces to the correct limit.
inline complex_t ts_pair(const KernelSpec& spec, int p, const Point3& s, const Point3& sn, const Point3& c,
                         const Point3& t, const Point3& tn, TsWorkspace& ws) {
  const Point3 ds = s - c, dt = t - c;
  const double R = norm(ds), r = norm(dt);
  const Point3 shat = ds / R;
  const Point3 that = r > 0.0 ? dt / r : shat;
  const double cg = r > 0.0 ? std::clamp(dot(ds, dt) / (r * R), -1.0, 1.0) : 1.0;
  ws.reserve(p);
  specfun::legendre_fill(p, cg, ws.pn.data(), ws.dpn.data());
  const double* P = ws.pn.data();
  const double* dP = ws.dpn.data();

  if (spec.equation == Equation::Laplace) {
    double acc = 0.0;
    switch (spec.variant) {
      case Variant::SingleLayer: {
        double ratio = 1.0 / R;  // r^n / R^{n+1}
        for (int n = 0; n <= p; ++n) {
          acc += ratio * P[n];
          ratio *= r / R;
        }
        break;
      }
      case Variant::TargetNormalDeriv: {
        const double tn_t = dot(that, tn), tn_s = dot(shat, tn);
        const double ang = tn_s - tn_t * cg;
        double ratio = 1.0 / (R * R);  // r^{n-1} / R^{n+1}
        for (int n = 1; n <= p; ++n) {
          acc += ratio * (n * tn_t * P[n] + ang * dP[n]);
          ratio *= r / R;
        }
        break;
      }
      case Variant::SourceNormalDeriv: {
        const double sn_s = dot(shat, sn), sn_t = dot(that, sn);
        const double ang = sn_t - sn_s * cg;
        double ratio = 1.0 / (R * R);  // r^n / R^{n+2}
        for (int n = 0; n <= p; ++n) {
          acc += ratio * (-(n + 1.0) * sn_s * P[n] + ang * dP[n]);
          ratio *= r / R;
        }
        break;
      }
    }
    return acc * kInv4Pi;
  }

  const double k = spec.helmholtz_k;
  const auto hs = specfun::sph_bessel_all(p, k * R);
  ws.jn.assign(p + 1, 0.0);
  ws.jpn.assign(p + 1, 0.0);
  ws.jox.assign(p + 1, 0.0);
  if (r > 0.0) {
    const auto js = specfun::sph_bessel_all(p + 1, k * r);
    for (int n = 0; n <= p; ++n) {
      ws.jn[n] = js.j[n];
      ws.jpn[n] = js.jprime[n];
      ws.jox[n] = n == 0 ? js.j[0] / (k * r) : (js.j[n - 1] + js.j[n + 1]) / (2.0 * n + 1.0);
    }
  } else {
    ws.jn[0] = 1.0;
    if (p >= 1) ws.jpn[1] = ws.jox[1] = 1.0 / 3.0;
  }
  complex_t acc = 0.0;
  switch (spec.variant) {
    case Variant::SingleLayer:
      for (int n = 0; n <= p; ++n) acc += (2.0 * n + 1.0) * ws.jn[n] * hs.h[n] * P[n];
      break;
    case Variant::TargetNormalDeriv: {
      const double tn_t = dot(that, tn), tn_s = dot(shat, tn);
      const double ang = tn_s - tn_t * cg;
      for (int n = 0; n <= p; ++n) {
        // j_n(kr)/r = k * j_n(kr)/(kr)
        acc += (2.0 * n + 1.0) * hs.h[n] * k * (tn_t * ws.jpn[n] * P[n] + ang * ws.jox[n] * dP[n]);
      }
      break;
    }
    case Variant::SourceNormalDeriv: {
      const double sn_s = dot(shat, sn), sn_t = dot(that, sn);
      const double ang = sn_t - sn_s * cg;
      for (int n = 0; n <= p; ++n) {
        acc += (2.0 * n + 1.0) * ws.jn[n] * (k * sn_s * hs.hprime[n] * P[n] + ang * hs.h[n] / R * dP[n]);
      }
      break;
    }
  }
  return complex_t(0.0, k) * kInv4Pi * acc;
}

inline void check_ts_geometry(const Point3& s, const Point3& c, const Point3& t) {
  const double R = norm(s - c), r = norm(t - c);
  if (R == 0.0) throw NumericalError("ts_eval: source coincides with expansion center");
  if (r > R * (1.0 + 1e-12)) throw DomainError("ts_eval: target outside the convergence ball |t-c| <= |s-c|");
}

}  // namespace detail

/// p-th order target-specific expansion of the configured kernel variant.
inline complex_t ts_eval(const TsConfig& cfg, const Point3& source, const std::optional<Point3>& source_normal,
                         const Point3& center, const Point3& target, const std::optional<Point3>& target_normal) {
  cfg.spec.validate();
  if (cfg.p_qbx < 0) throw ValidationError("ts_eval: negative order");
  detail::check_normal(target_normal, cfg.spec.needs_target_normal(), "target");
  detail::check_normal(source_normal, cfg.spec.needs_source_normal(), "source");
  detail::check_ts_geometry(source, center, target);
  TsWorkspace ws;
  return detail::ts_pair(cfg.spec, cfg.p_qbx, source, source_normal.value_or(Point3{}), center, target,
                         target_normal.value_or(Point3{}), ws);
}

/// sum_j w_j ts_eval(s_j); `source_normals` may be empty unless the variant
/// needs them.
inline complex_t ts_accumulate(const TsConfig& cfg, std::span<const Point3> sources, std::span<const complex_t> weights,
                               std::span<const Point3> source_normals, const Point3& center, const Point3& target,
                               const std::optional<Point3>& target_normal) {
  cfg.spec.validate();
  if (weights.size() != sources.size()) throw ValidationError("ts_accumulate: weights/sources length mismatch");
  const bool dipole = cfg.spec.needs_source_normal();
  if (dipole && source_normals.size() != sources.size()) throw ValidationError("ts_accumulate: source normals required");
  detail::check_normal(target_normal, cfg.spec.needs_target_normal(), "target");
  const Point3 tn = target_normal.value_or(Point3{});
  TsWorkspace ws;
  complex_t acc = 0.0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    try {
      detail::check_ts_geometry(sources[j], center, target);
    } catch (const std::exception& e) {
      throw SingularPairError(e.what(), 0, j);
    }
    acc += weights[j] * detail::ts_pair(cfg.spec, cfg.p_qbx, sources[j], dipole ? source_normals[j] : Point3{}, center,
                                        target, tn, ws);
  }
  return acc;
}

}  // namespace gigaqbx
