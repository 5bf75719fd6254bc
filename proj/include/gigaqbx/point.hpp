#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace gigaqbx {

using complex_t = std::complex<double>;

/// Cartesian point or vector in R^3.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Point3& operator-=(const Point3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Point3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend constexpr Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
  friend constexpr Point3 operator-(const Point3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Point3 operator*(Point3 a, double s) { return a *= s; }
  friend constexpr Point3 operator*(double s, Point3 a) { return a *= s; }
  friend constexpr Point3 operator/(Point3 a, double s) { return a *= (1.0 / s); }
  friend constexpr bool operator==(const Point3&, const Point3&) = default;
};

constexpr double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const Point3& a) {
  return std::fmax(std::fabs(a.x), std::fmax(std::fabs(a.y), std::fabs(a.z)));
}

inline Point3 normalized(const Point3& a) { return a / norm(a); }

inline bool is_finite(const Point3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Complex-valued 3-vector (gradients of complex potentials).
struct CPoint3 {
  complex_t x, y, z;
};

inline complex_t dot(const CPoint3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Error categories. The CLI maps ValidationError to exit code 1 and
// NumericalError to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularPairError : public NumericalError {
 public:
  SingularPairError(const std::string& what, std::size_t target, std::size_t source)
      : NumericalError(what + " (target " + std::to_string(target) + ", source " + std::to_string(source) + ")"),
        target_index(target),
        source_index(source) {}
  std::size_t target_index;
  std::size_t source_index;
};

}  // namespace gigaqbx
