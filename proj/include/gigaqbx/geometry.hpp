#pragma once

// Parametric test surfaces discretized into curved triangles.
//
// Each element is the image of the reference triangle {a, b >= 0, a + b <= 1}
// under an element map with analytic derivatives. Source quadrature nodes use
// a triangle rule built from three tensor Gauss-Legendre quadrilaterals (the
// triangle split at its centroid and edge midpoints); on-surface targets sit
// on a shrunken equispaced lattice of degree `target_degree` per element.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "gigaqbx/kernels.hpp"
#include "gigaqbx/point.hpp"
#include "gigaqbx/specfun.hpp"

namespace gigaqbx {

inline constexpr int kMaxQuadOrder = 20;
inline constexpr int kMaxTargetDegree = 8;

struct QuadratureRule {
  std::vector<double> a, b, w;  // reference triangle, weights sum to 1/2
  int order = 0;
  std::size_t size() const { return w.size(); }
};

/// Gauss-Legendre nodes/weights on [0, 1].
inline void gauss_legendre01(int q, std::vector<double>& x, std::vector<double>& w) {
  x.assign(q, 0.0);
  w.assign(q, 0.0);
  std::vector<double> P(q + 2), dP(q + 2);
  for (int i = 0; i < q; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      specfun::legendre_fill(q, z, P.data(), dP.data());
      const double dz = P[q] / dP[q];
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    specfun::legendre_fill(q, z, P.data(), dP.data());
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dP[q] * dP[q]);  // 2/((1-z^2)P'^2) scaled to [0, 1]
  }
}

/// Triangle rule with 3 q^2 nodes, exact for polynomials of degree 2q - 2.
inline QuadratureRule triangle_rule(int q) {
  if (q < 1 || q > kMaxQuadOrder) {
    throw ValidationError("unsupported quadrature order " + std::to_string(q) + " (supported: 1.." +
                          std::to_string(kMaxQuadOrder) + ")");
  }
  std::vector<double> x, w;
  gauss_legendre01(q, x, w);
  const std::array<std::array<double, 2>, 3> V{{{0, 0}, {1, 0}, {0, 1}}};
  const std::array<double, 2> G{1.0 / 3.0, 1.0 / 3.0};
  QuadratureRule rule;
  rule.order = q;
  for (int k = 0; k < 3; ++k) {
    // kite: vertex V_k, midpoint to next vertex, centroid, midpoint to previous vertex
    const auto& v0 = V[k];
    const auto& vn = V[(k + 1) % 3];
    const auto& vp = V[(k + 2) % 3];
    const std::array<double, 2> m1{(v0[0] + vn[0]) / 2, (v0[1] + vn[1]) / 2};
    const std::array<double, 2> m2{(v0[0] + vp[0]) / 2, (v0[1] + vp[1]) / 2};
    const std::array<std::array<double, 2>, 4> Q{{v0, m1, G, m2}};
    for (int i = 0; i < q; ++i)
      for (int j = 0; j < q; ++j) {
        const double s = x[i], t = x[j];
        const double c0 = (1 - s) * (1 - t), c1 = s * (1 - t), c2 = s * t, c3 = (1 - s) * t;
        double pa = 0, pb = 0, da_s = 0, db_s = 0, da_t = 0, db_t = 0;
        for (int c = 0; c < 2; ++c) {
          const double val = c0 * Q[0][c] + c1 * Q[1][c] + c2 * Q[2][c] + c3 * Q[3][c];
          const double ds = -(1 - t) * Q[0][c] + (1 - t) * Q[1][c] + t * Q[2][c] - t * Q[3][c];
          const double dt = -(1 - s) * Q[0][c] - s * Q[1][c] + s * Q[2][c] + (1 - s) * Q[3][c];
          (c == 0 ? pa : pb) = val;
          (c == 0 ? da_s : db_s) = ds;
          (c == 0 ? da_t : db_t) = dt;
        }
        rule.a.push_back(pa);
        rule.b.push_back(pb);
        rule.w.push_back(w[i] * w[j] * std::fabs(da_s * db_t - db_s * da_t));
      }
  }
  return rule;
}

/// Shrunken equispaced lattice (i + 1/3)/(d + 1), i + j <= d, strictly inside.
inline void target_lattice(int d, std::vector<double>& a, std::vector<double>& b) {
  if (d < 0 || d > kMaxTargetDegree) throw ValidationError("unsupported target degree " + std::to_string(d));
  const double delta = 1.0 / 3.0;
  a.clear();
  b.clear();
  for (int j = 0; j <= d; ++j)
    for (int i = 0; i + j <= d; ++i) {
      a.push_back((i + delta) / (d + 3 * delta));
      b.push_back((j + delta) / (d + 3 * delta));
    }
}

/// Monomial Vandermonde interpolation from the target lattice to the
/// quadrature nodes of a rule: values_at_nodes = M * values_at_targets.
inline Eigen::MatrixXd target_to_node_interpolation(int target_degree, const QuadratureRule& rule) {
  std::vector<double> ta, tb;
  target_lattice(target_degree, ta, tb);
  const int nt = static_cast<int>(ta.size());
  auto vandermonde = [&](const std::vector<double>& a, const std::vector<double>& b) {
    Eigen::MatrixXd V(a.size(), nt);
    for (std::size_t r = 0; r < a.size(); ++r) {
      int col = 0;
      for (int deg = 0; deg <= target_degree; ++deg)
        for (int i = 0; i <= deg; ++i) V(r, col++) = std::pow(a[r] - 1.0 / 3, deg - i) * std::pow(b[r] - 1.0 / 3, i);
    }
    return V;
  };
  const Eigen::MatrixXd Vt = vandermonde(ta, tb);
  const Eigen::MatrixXd Vs = vandermonde(rule.a, rule.b);
  return Vt.transpose().partialPivLu().solve(Vs.transpose()).transpose();
}

struct Discretization {
  std::string name;
  // source quadrature nodes
  std::vector<Point3> nodes;
  std::vector<double> weights;
  std::vector<Point3> normals;
  std::vector<int> element_id;
  // per element
  std::vector<double> element_size;
  // on-surface targets
  std::vector<Point3> targets;
  std::vector<Point3> target_normals;
  std::vector<int> target_element_id;
  // element layout: nodes of element e occupy [e * nodes_per_element, ...);
  // zero when unknown (e.g. loaded from a file without layout data)
  int quad_order = 0;
  int target_degree = 0;
  int nodes_per_element = 0;
  int targets_per_element = 0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_targets() const { return targets.size(); }
  std::size_t num_elements() const { return element_size.size(); }
  bool has_layout() const { return nodes_per_element > 0 && targets_per_element > 0; }

  void validate() const {
    const std::size_t n = nodes.size();
    if (weights.size() != n || normals.size() != n || element_id.size() != n) {
      throw ValidationError("discretization: node arrays have inconsistent lengths");
    }
    if (target_normals.size() != targets.size() || target_element_id.size() != targets.size()) {
      throw ValidationError("discretization: target arrays have inconsistent lengths");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights[i] > 0.0) || !is_finite(nodes[i])) throw ValidationError("discretization: invalid node or weight");
      if (std::fabs(norm(normals[i]) - 1.0) > 1e-10) throw ValidationError("discretization: normals must be unit");
      if (element_id[i] < 0 || static_cast<std::size_t>(element_id[i]) >= element_size.size()) {
        throw ValidationError("discretization: element id out of range");
      }
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (!is_finite(targets[i])) throw ValidationError("discretization: invalid target");
      if (target_element_id[i] < 0 || static_cast<std::size_t>(target_element_id[i]) >= element_size.size()) {
        throw ValidationError("discretization: target element id out of range");
      }
    }
    for (double h : element_size)
      if (!(h > 0.0)) throw ValidationError("discretization: element sizes must be positive");
  }

  double area() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

enum class Side { Interior = -1, Exterior = 1 };

struct QbxCenterSet {
  std::vector<Point3> centers;
  std::vector<double> radii;
  std::vector<int> target_index;  // on-surface target served by each center
  Side side = Side::Exterior;
  std::size_t size() const { return centers.size(); }
};

namespace detail {

struct SurfaceSample {
  Point3 x, xa, xb, normal;
};

/// Element map: reference (a, b) -> position, tangent derivatives and unit
/// normal with the surface orientation.
using ElementMap = std::function<SurfaceSample(double, double)>;

inline void append_element(Discretization& d, const ElementMap& map, const QuadratureRule& rule,
                           const std::vector<double>& ta, const std::vector<double>& tb) {
  const int e = static_cast<int>(d.element_size.size());
  const std::array<Point3, 3> verts{map(0, 0).x, map(1, 0).x, map(0, 1).x};
  d.element_size.push_back(std::max({norm(verts[0] - verts[1]), norm(verts[1] - verts[2]), norm(verts[2] - verts[0])}));
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const SurfaceSample s = map(rule.a[i], rule.b[i]);
    d.nodes.push_back(s.x);
    d.weights.push_back(rule.w[i] * norm(cross(s.xa, s.xb)));
    d.normals.push_back(s.normal);
    d.element_id.push_back(e);
  }
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const SurfaceSample s = map(ta[i], tb[i]);
    d.targets.push_back(s.x);
    d.target_normals.push_back(s.normal);
    d.target_element_id.push_back(e);
  }
}

inline void start_layout(Discretization& d, const QuadratureRule& rule, int target_degree, std::vector<double>& ta,
                         std::vector<double>& tb) {
  target_lattice(target_degree, ta, tb);
  d.quad_order = rule.order;
  d.target_degree = target_degree;
  d.nodes_per_element = static_cast<int>(rule.size());
  d.targets_per_element = static_cast<int>(ta.size());
}

/// Icosahedron refined by repeated 4-splits with midpoints projected to the
/// unit sphere; triangles oriented counterclockwise seen from outside.
inline std::vector<std::array<Point3, 3>> icosphere(int refinement) {
  if (refinement < 0) throw ValidationError("refinement must be nonnegative");
  const double phi = std::numbers::phi;
  std::vector<Point3> v;
  for (double s1 : {-1.0, 1.0})
    for (double s2 : {-1.0, 1.0}) {
      v.push_back({0, s1, s2 * phi});
      v.push_back({s1, s2 * phi, 0});
      v.push_back({s2 * phi, 0, s1});
    }
  std::vector<std::array<Point3, 3>> tris;
  const std::size_t nv = v.size();
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t j = i + 1; j < nv; ++j)
      for (std::size_t k = j + 1; k < nv; ++k) {
        auto edge = [&](std::size_t a, std::size_t b) { return std::fabs(norm(v[a] - v[b]) - 2.0) < 1e-9; };
        if (edge(i, j) && edge(j, k) && edge(i, k)) {
          std::array<Point3, 3> t{normalized(v[i]), normalized(v[j]), normalized(v[k])};
          if (dot(cross(t[1] - t[0], t[2] - t[0]), t[0] + t[1] + t[2]) < 0) std::swap(t[1], t[2]);
          tris.push_back(t);
        }
      }
  for (int r = 0; r < refinement; ++r) {
    std::vector<std::array<Point3, 3>> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      const Point3 m01 = normalized(t[0] + t[1]), m12 = normalized(t[1] + t[2]), m20 = normalized(t[2] + t[0]);
      next.push_back({t[0], m01, m20});
      next.push_back({m01, t[1], m12});
      next.push_back({m20, m12, t[2]});
      next.push_back({m01, m12, m20});
    }
    tris.swap(next);
  }
  return tris;
}

/// Star-shaped surface x = rho(u) u over the unit sphere, with radius
/// function rho and its ambient gradient (only the tangential part is used).
struct RadialSurface {
  std::function<double(const Point3&)> rho;
  std::function<Point3(const Point3&)> grad_rho;
};

inline ElementMap radial_element_map(const std::array<Point3, 3>& tri, const RadialSurface& surf) {
  return [tri, surf](double a, double b) {
    const Point3 e1 = tri[1] - tri[0], e2 = tri[2] - tri[0];
    const Point3 q = tri[0] + a * e1 + b * e2;
    const double ql = norm(q);
    const Point3 u = q / ql;
    const double rho = surf.rho(u);
    const Point3 g = surf.grad_rho(u);
    // d(rho(u) u)/dq = (rho I + u g^T)(I - u u^T)/|q|
    auto apply = [&](const Point3& e) {
      const Point3 et = (e - dot(u, e) * u) / ql;
      return rho * et + dot(g, et) * u;
    };
    SurfaceSample s;
    s.x = rho * u;
    s.xa = apply(e1);
    s.xb = apply(e2);
    Point3 n = cross(s.xa, s.xb);
    if (dot(n, u) < 0) n = -n;
    s.normal = normalized(n);
    return s;
  };
}

inline Discretization radial_discretization(const std::string& name, const RadialSurface& surf, int refinement,
                                            int quad_order, int target_degree) {
  const QuadratureRule rule = triangle_rule(quad_order);
  Discretization d;
  d.name = name;
  std::vector<double> ta, tb;
  start_layout(d, rule, target_degree, ta, tb);
  for (const auto& tri : icosphere(refinement)) append_element(d, radial_element_map(tri, surf), rule, ta, tb);
  return d;
}

/// Coefficients (ascending powers) of the m-th derivative of P_k.
inline std::vector<double> legendre_derivative_poly(int k, int m) {
  std::vector<double> c(k + 1, 0.0);
  for (int j = 0; 2 * j <= k; ++j) {
    double term = std::ldexp(1.0, -k);
    auto binom = [](int n, int r) {
      double out = 1.0;
      for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
      return out;
    };
    term *= binom(k, j) * binom(2 * k - 2 * j, k);
    c[k - 2 * j] = (j % 2 ? -term : term);
  }
  for (int d = 0; d < m; ++d) {
    std::vector<double> next(std::max<std::size_t>(c.size() - 1, 1), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i) next[i - 1] = c[i] * i;
    if (c.size() == 1) next[0] = 0.0;
    c.swap(next);
  }
  return c;
}

inline double horner(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

}  // namespace detail

/// Sphere of the given radius from a refined icosahedron.
inline Discretization make_sphere(double radius, int refinement, int quad_order, int target_degree = 3) {
  if (!(radius > 0.0)) throw ValidationError("sphere radius must be positive");
  detail::RadialSurface surf{[radius](const Point3&) { return radius; }, [](const Point3&) { return Point3{}; }};
  return detail::radial_discretization("sphere", surf, refinement, quad_order, target_degree);
}

/// Unnormalized Re Y_k^m on the unit sphere, N * P_k^(m)(z) * Re (x + iy)^m,
/// and its ambient gradient. The normalization cancels in the urchin radius.
struct UrchinHarmonic {
  int k = 1, m = 0;
  std::vector<double> dm, dm1;  // d^m P_k, d^{m+1} P_k

  UrchinHarmonic(int k_, int m_)
      : k(k_), m(m_), dm(detail::legendre_derivative_poly(k_, m_)), dm1(detail::legendre_derivative_poly(k_, m_ + 1)) {}

  static complex_t ipow(complex_t w, int e) {
    complex_t out = 1.0;
    for (int i = 0; i < e; ++i) out *= w;
    return out;
  }
  double value(const Point3& u) const { return detail::horner(dm, u.z) * ipow(complex_t(u.x, u.y), m).real(); }
  Point3 gradient(const Point3& u) const {
    const complex_t w(u.x, u.y);
    const double f = detail::horner(dm, u.z), fp = detail::horner(dm1, u.z);
    const double g = ipow(w, m).real();
    const complex_t gm1 = m > 0 ? double(m) * ipow(w, m - 1) : complex_t(0.0);
    return {f * gm1.real(), f * (complex_t(0.0, 1.0) * gm1).real(), fp * g};
  }
};

/// max and min of the urchin harmonic over the sphere: dense (theta, phi)
/// sampling followed by local pattern-search refinement of the best samples.
inline std::pair<double, double> urchin_extrema(const UrchinHarmonic& h) {
  auto at = [&](double th, double ph) {
    return h.value({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
  };
  const int nth = 200, nph = 400;
  double best[2] = {-1e300, 1e300};
  double arg[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i <= nth; ++i)
    for (int j = 0; j < nph; ++j) {
      const double th = std::numbers::pi * i / nth, ph = 2 * std::numbers::pi * j / nph;
      const double v = at(th, ph);
      if (v > best[0]) best[0] = v, arg[0][0] = th, arg[0][1] = ph;
      if (v < best[1]) best[1] = v, arg[1][0] = th, arg[1][1] = ph;
    }
  for (int which = 0; which < 2; ++which) {
    const double sign = which == 0 ? 1.0 : -1.0;
    double th = arg[which][0], ph = arg[which][1], val = sign * best[which];
    double step = std::numbers::pi / nth;
    while (step > 1e-14) {
      bool moved = false;
      for (const auto& dv : {std::array<double, 2>{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const double t2 = std::clamp(th + step * dv[0], 0.0, std::numbers::pi), p2 = ph + step * dv[1];
        const double v = sign * at(t2, p2);
        if (v > val) {
          val = v, th = t2, ph = p2;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    best[which] = sign * val;
  }
  return {best[0], best[1]};
}

/// Urchin gamma_k: r_k = 0.2 + (Re Y_k^{floor(k/2)} - m_k)/(M_k - m_k).
inline Discretization make_urchin(int k, int refinement, int quad_order, int target_degree = 3) {
  if (k < 1) throw ValidationError("urchin parameter k must be >= 1");
  const auto h = std::make_shared<UrchinHarmonic>(k, k / 2);
  const auto [hi, lo] = urchin_extrema(*h);
  const double span = hi - lo;
  detail::RadialSurface surf{[h, lo, span](const Point3& u) { return 0.2 + (h->value(u) - lo) / span; },
                             [h, span](const Point3& u) { return h->gradient(u) / span; }};
  return detail::radial_discretization("urchin" + std::to_string(k), surf, refinement, quad_order, target_degree);
}

/// Grid of element counts for one torus at a refinement level: 10 * 2^r
/// around the major circle, v count a multiple of 3 so that the pinch
/// circles cos v = -1/2 fall on element edges.
inline std::pair<int, int> torus_grid_size(int refinement) {
  const int nu = 10 << refinement;
  const int nv = 3 * (((5 << refinement) + 2) / 3);
  return {nu, nv};
}

inline constexpr double kTorusPitch = 6.6;  // diameter 6 plus spacing 0.6

/// rows x cols array of tori x = cos u (1 + 2 cos v), y = sin u (1 + 2 cos v),
/// z = 2 sin v, placed at pitch kTorusPitch in the xy-plane.
inline Discretization make_torus_array(int rows, int cols, int refinement, int quad_order, int target_degree = 3) {
  if (rows < 1 || cols < 1) throw ValidationError("torus array dimensions must be >= 1");
  if (refinement < 0) throw ValidationError("refinement must be nonnegative");
  const QuadratureRule rule = triangle_rule(quad_order);
  Discretization d;
  d.name = "torus" + std::to_string(rows * cols);
  std::vector<double> ta, tb;
  detail::start_layout(d, rule, target_degree, ta, tb);
  const auto [nu, nv] = torus_grid_size(refinement);
  const double du = 2 * std::numbers::pi / nu, dv = 2 * std::numbers::pi / nv;
  for (int row = 0; row < rows; ++row)
    for (int col = 0; col < cols; ++col) {
      const Point3 offset{col * kTorusPitch, row * kTorusPitch, 0.0};
      for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j)
          for (int half = 0; half < 2; ++half) {
            // each (u, v) rectangle is split along a diagonal; element map is
            // (u, v) = origin + a e1 + b e2
            const double sgn = half == 0 ? 1.0 : -1.0;
            const double ou = half == 0 ? i * du : (i + 1) * du, ov = half == 0 ? j * dv : (j + 1) * dv;
            const double e1u = sgn * du, e2v = sgn * dv;
            detail::ElementMap map = [=](double a, double b) {
              const double u = ou + a * e1u, v = ov + b * e2v;
              const double cu = std::cos(u), su = std::sin(u), cv = std::cos(v), sv = std::sin(v);
              const double rr = 1 + 2 * cv;
              const Point3 xu{-su * rr, cu * rr, 0.0}, xv{-2 * cu * sv, -2 * su * sv, 2 * cv};
              detail::SurfaceSample s;
              s.x = Point3{cu * rr, su * rr, 2 * sv} + offset;
              s.xa = e1u * xu;
              s.xb = e2v * xv;
              s.normal = Point3{cu * cv, su * cv, sv};
              return s;
            };
            detail::append_element(d, map, rule, ta, tb);
          }
    }
  return d;
}

/// tau_{2k}: 2 x k grid of tori.
inline Discretization make_torus_grid(int copies_k, int refinement, int quad_order, int target_degree = 3) {
  if (copies_k < 1) throw ValidationError("torus copies must be >= 1");
  auto d = make_torus_array(2, copies_k, refinement, quad_order, target_degree);
  d.name = "torus" + std::to_string(2 * copies_k);
  return d;
}

/// One QBX center per on-surface target at distance alpha * h along the
/// (side-signed) normal, h being the target's element size.
inline QbxCenterSet place_qbx_centers(const Discretization& disc, Side side, double alpha = 0.5) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in (0, 1]");
  QbxCenterSet cs;
  cs.side = side;
  const double sgn = side == Side::Exterior ? 1.0 : -1.0;
  cs.centers.reserve(disc.num_targets());
  for (std::size_t i = 0; i < disc.num_targets(); ++i) {
    const double rc = alpha * disc.element_size[disc.target_element_id[i]];
    cs.centers.push_back(disc.targets[i] + (sgn * rc) * disc.target_normals[i]);
    cs.radii.push_back(rc);
    cs.target_index.push_back(static_cast<int>(i));
  }
  return cs;
}

}  // namespace gigaqbx
