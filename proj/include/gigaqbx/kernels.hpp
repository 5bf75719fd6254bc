#pragma once

// Laplace and Helmholtz Green's functions and their normal derivatives.
//   Laplace:   G(t, s) = 1 / (4 pi |t - s|)
//   Helmholtz: G(t, s) = exp(i k |t - s|) / (4 pi |t - s|)

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gigaqbx/parallel.hpp"
#include "gigaqbx/point.hpp"

namespace gigaqbx {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInv4Pi = 1.0 / (4.0 * kPi);

enum class Equation { Laplace, Helmholtz };
enum class Variant { SingleLayer, TargetNormalDeriv, SourceNormalDeriv };

struct KernelSpec {
  Equation equation = Equation::Laplace;
  double helmholtz_k = 0.0;
  Variant variant = Variant::SingleLayer;

  static KernelSpec laplace(Variant v = Variant::SingleLayer) { return {Equation::Laplace, 0.0, v}; }
  static KernelSpec helmholtz(double k, Variant v = Variant::SingleLayer) { return {Equation::Helmholtz, k, v}; }

  bool needs_target_normal() const { return variant == Variant::TargetNormalDeriv; }
  bool needs_source_normal() const { return variant == Variant::SourceNormalDeriv; }

  void validate() const {
    if (equation == Equation::Helmholtz && !(helmholtz_k > 0.0 && std::isfinite(helmholtz_k))) {
      throw ValidationError("Helmholtz wavenumber must be positive and finite");
    }
  }
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::SingleLayer: return "s";
    case Variant::TargetNormalDeriv: return "sprime";
    case Variant::SourceNormalDeriv: return "d";
  }
  return "?";
}

namespace detail {

/// Kernel without argument checks. `tn`/`sn` are read only when the variant
/// needs them. Returns NaN-free values for t != s.
inline complex_t kernel_unchecked(const KernelSpec& spec, const Point3& t, const Point3& tn, const Point3& s,
                                  const Point3& sn) {
  const Point3 d = t - s;
  const double r2 = dot(d, d);
  const double r = std::sqrt(r2);
  if (spec.equation == Equation::Laplace) {
    const double g = kInv4Pi / r;
    switch (spec.variant) {
      case Variant::SingleLayer: return g;
      case Variant::TargetNormalDeriv: return -g * dot(d, tn) / r2;
      case Variant::SourceNormalDeriv: return g * dot(d, sn) / r2;
    }
    return 0.0;
  }
  const double k = spec.helmholtz_k;
  const complex_t g = std::polar(kInv4Pi / r, k * r);
  if (spec.variant == Variant::SingleLayer) return g;
  // dG/dr = G (ik - 1/r); grad_t G = dG/dr * d/r and grad_s G = -grad_t G
  const complex_t dgdr_over_r = g * complex_t(-1.0 / r, k) / r;
  if (spec.variant == Variant::TargetNormalDeriv) return dgdr_over_r * dot(d, tn);
  return -dgdr_over_r * dot(d, sn);
}

inline void check_normal(const std::optional<Point3>& n, bool needed, const char* which) {
  if (!needed) return;
  if (!n) throw ValidationError(std::string("missing ") + which + " normal for kernel variant");
  if (std::fabs(norm(*n) - 1.0) > 1e-12) throw ValidationError(std::string(which) + " normal is not unit length");
}

}  // namespace detail

/// K(t, s), nu(t).grad_t K or nu(s).grad_s K depending on spec.variant.
inline complex_t kernel_value(const KernelSpec& spec, const Point3& target, const std::optional<Point3>& target_normal,
                              const Point3& source, const std::optional<Point3>& source_normal) {
  spec.validate();
  detail::check_normal(target_normal, spec.needs_target_normal(), "target");
  detail::check_normal(source_normal, spec.needs_source_normal(), "source");
  if (target == source) throw SingularPairError("kernel evaluated at coincident points", 0, 0);
  return detail::kernel_unchecked(spec, target, target_normal.value_or(Point3{}), source,
                                  source_normal.value_or(Point3{}));
}

/// Brute-force sum_j w_j K(x_i, y_j). Normals spans may be empty when the
/// variant does not need them. Per-target summation runs in source order.
inline std::vector<complex_t> direct_sum(const KernelSpec& spec, std::span<const Point3> sources,
                                         std::span<const complex_t> weights, std::span<const Point3> source_normals,
                                         std::span<const Point3> targets, std::span<const Point3> target_normals) {
  spec.validate();
  if (weights.size() != sources.size()) throw ValidationError("direct_sum: weights/sources length mismatch");
  if (spec.needs_source_normal() && source_normals.size() != sources.size()) {
    throw ValidationError("direct_sum: source normals required");
  }
  if (spec.needs_target_normal() && target_normals.size() != targets.size()) {
    throw ValidationError("direct_sum: target normals required");
  }
  std::vector<complex_t> out(targets.size(), 0.0);
  parallel_for(targets.size(), [&](std::size_t i) {
    const Point3 tn = spec.needs_target_normal() ? target_normals[i] : Point3{};
    complex_t acc = 0.0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      if (targets[i] == sources[j]) throw SingularPairError("direct_sum: coincident target and source", i, j);
      const Point3 sn = spec.needs_source_normal() ? source_normals[j] : Point3{};
      acc += weights[j] * detail::kernel_unchecked(spec, targets[i], tn, sources[j], sn);
    }
    out[i] = acc;
  });
  return out;
}

}  // namespace gigaqbx
