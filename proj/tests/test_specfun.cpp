#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gigaqbx/specfun.hpp"

using namespace gigaqbx;
using namespace gigaqbx::specfun;

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

Point3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Point3 v{g(rng), g(rng), g(rng)};
  return v / norm(v);
}

}  // namespace

TEST(Legendre, TrivialValues) {
  EXPECT_EQ(legendre_all(3, 0.77).values[0], 1.0);
  EXPECT_DOUBLE_EQ(legendre_all(2, 0.5).values[2], -0.125);
  EXPECT_DOUBLE_EQ(legendre_all(4, -0.3).values[1], -0.3);
}

TEST(Legendre, DerivativesMatchFiniteDifferences) {
  const double x = 0.3, h = 1e-6;
  const auto seq = legendre_all(10, x);
  const auto up = legendre_all(10, x + h), dn = legendre_all(10, x - h);
  for (int n = 0; n <= 10; ++n) {
    EXPECT_NEAR(seq.derivs[n], (up.values[n] - dn.values[n]) / (2 * h), 1e-6) << "n=" << n;
  }
}

TEST(Legendre, RecurrenceResidualAndBound) {
  for (double x = -1.0; x <= 1.0; x += 0.0625) {
    const auto seq = legendre_all(40, x);
    for (int n = 1; n < 40; ++n) {
      const double res = (n + 1) * seq.values[n + 1] - (2 * n + 1) * x * seq.values[n] + n * seq.values[n - 1];
      EXPECT_LE(std::fabs(res), 1e-13);
      EXPECT_LE(std::fabs(seq.values[n]), 1.0 + 1e-15);
    }
  }
}

TEST(Legendre, EndpointDerivative) {
  const auto seq = legendre_all(12, 1.0);
  for (int n = 0; n <= 12; ++n) EXPECT_NEAR(seq.derivs[n], n * (n + 1) / 2.0, 1e-10);
}

TEST(Legendre, DomainClampAndError) {
  EXPECT_NO_THROW(legendre_all(3, 1.0 + 5e-13));
  EXPECT_THROW(legendre_all(3, 1.0 + 1e-9), DomainError);
  EXPECT_THROW(assoc_legendre(3, 1, -1.1), DomainError);
}

TEST(AssocLegendre, ReducesToLegendre) {
  const auto seq = legendre_all(9, 0.41);
  for (int n = 0; n <= 9; ++n) EXPECT_NEAR(assoc_legendre(n, 0, 0.41), seq.values[n], 1e-14);
}

TEST(AssocLegendre, ExplicitPolynomials) {
  EXPECT_DOUBLE_EQ(assoc_legendre(1, 1, 0.0), 1.0);
  const double x = 0.25;
  // phase-free P_4^2 = (15/2)(7x^2 - 1)(1 - x^2)
  EXPECT_NEAR(assoc_legendre(4, 2, x), 7.5 * (7 * x * x - 1) * (1 - x * x), 1e-13);
  // P_3^3 = 15 (1 - x^2)^{3/2}
  EXPECT_NEAR(assoc_legendre(3, 3, x), 15.0 * std::pow(1 - x * x, 1.5), 1e-13);
  EXPECT_THROW(assoc_legendre(2, 3, 0.1), ValidationError);
}

TEST(Ynm, ConstantAndConjugation) {
  EXPECT_NEAR(ynm(0, 0, 1.1, 2.3).real(), 0.2820947918, 1e-10);
  for (int n = 0; n <= 8; ++n)
    for (int m = 0; m <= n; ++m) {
      const complex_t a = ynm(n, m, 0.7, -1.9), b = ynm(n, -m, 0.7, -1.9);
      EXPECT_LE(std::abs(a - std::conj(b)), 1e-15);
    }
  EXPECT_THROW(ynm(2, 3, 0.1, 0.1), ValidationError);
}

TEST(Ynm, MatchesDefinitionWithFactorials) {
  const double th = 1.234, ph = 0.456;
  for (int n = 0; n <= 12; ++n)
    for (int m = -n; m <= n; ++m) {
      const int am = std::abs(m);
      const double norm_factor = std::sqrt((2 * n + 1) / (4 * kPi) * factorial(n - am) / factorial(n + am));
      const complex_t expect = norm_factor * assoc_legendre(n, am, std::cos(th)) * std::polar(1.0, m * ph);
      EXPECT_LE(std::abs(ynm(n, m, th, ph) - expect), 1e-13 * std::max(1.0, std::abs(expect)));
    }
}

TEST(Ynm, AdditionTheorem) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Point3 a = random_unit(rng), b = random_unit(rng);
    const double ta = std::acos(a.z), pa = std::atan2(a.y, a.x);
    const double tb = std::acos(b.z), pb = std::atan2(b.y, b.x);
    const auto leg = legendre_all(20, dot(a, b));
    for (int n = 0; n <= 20; ++n) {
      complex_t sum = 0.0;
      for (int m = -n; m <= n; ++m) sum += ynm(n, m, ta, pa) * ynm(n, -m, tb, pb);
      EXPECT_NEAR((4 * kPi / (2 * n + 1) * sum).real(), leg.values[n], 1e-11);
      EXPECT_NEAR((4 * kPi / (2 * n + 1) * sum).imag(), 0.0, 1e-11);
    }
  }
}

TEST(HarmonicTable, MatchesYnmAndFiniteDifferences) {
  std::mt19937_64 rng(3);
  const int p = 10;
  HarmonicTable tab;
  for (int trial = 0; trial < 20; ++trial) {
    const Point3 d = random_unit(rng) * 1.7;
    tab.compute(p, d, true);
    const double th = std::acos(d.z / norm(d)), ph = std::atan2(d.y, d.x);
    const double h = 1e-6;
    for (int n = 0; n <= p; ++n)
      for (int m = -n; m <= n; ++m) {
        EXPECT_LE(std::abs(tab.y(n, m) - ynm(n, m, th, ph)), 1e-13);
        const complex_t fd_th = (ynm(n, m, th + h, ph) - ynm(n, m, th - h, ph)) / (2 * h);
        const complex_t fd_ph = (ynm(n, m, th, ph + h) - ynm(n, m, th, ph - h)) / (2 * h) / std::sin(th);
        EXPECT_LE(std::abs(tab.dtheta(n, m) - fd_th), 1e-6);
        EXPECT_LE(std::abs(tab.dphi_over_sin(n, m) - fd_ph), 1e-6);
      }
  }
}

TEST(HarmonicTable, PoleIsFinite) {
  HarmonicTable tab;
  tab.compute(8, Point3{0, 0, -2}, true);
  for (int n = 0; n <= 8; ++n)
    for (int m = -n; m <= n; ++m) {
      EXPECT_TRUE(std::isfinite(std::abs(tab.dphi_over_sin(n, m))));
      EXPECT_TRUE(std::isfinite(std::abs(tab.dtheta(n, m))));
    }
}

TEST(SphBessel, TrivialValues) {
  const auto s = sph_bessel_all(4, 1.0);
  EXPECT_NEAR(s.j[0], 0.8414709848, 1e-10);
  EXPECT_NEAR(s.h[0].real(), std::sin(1.0), 1e-14);
  EXPECT_NEAR(s.h[0].imag(), -std::cos(1.0), 1e-14);
  EXPECT_THROW(sph_bessel_all(3, 0.0), DomainError);
}

TEST(SphBessel, Wronskian) {
  for (double x : {0.05, 0.7, 2.7, 9.0, 25.0}) {
    const auto s = sph_bessel_all(20, x);
    const complex_t expect(0.0, 1.0 / (x * x));
    for (int n = 0; n <= 20; ++n) {
      const complex_t w = s.j[n] * s.hprime[n] - s.jprime[n] * s.h[n];
      EXPECT_LE(std::abs(w - expect), 1e-10 * std::abs(expect)) << "x=" << x << " n=" << n;
    }
  }
}

TEST(SphBessel, MatchesStandardLibrary) {
  for (double x : {0.1, 1.3, 4.0, 17.5}) {
    const auto s = sph_bessel_all(15, x);
    for (unsigned n = 0; n <= 15; ++n) {
      const double j = std::sph_bessel(n, x);
      EXPECT_LE(std::fabs(s.j[n] - j), 1e-12 * std::max(std::fabs(j), 1e-300) + 1e-300);
      if (x > 1.0) {
        EXPECT_LE(std::fabs(s.h[n].imag() - std::sph_neumann(n, x)), 1e-11 * std::fabs(std::sph_neumann(n, x)));
      }
    }
  }
}

TEST(SphBessel, JOverXLimit) {
  const auto small = sph_bessel_j_over_x(3, 1e-8);
  EXPECT_NEAR(small[1], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(small[2], 1e-8 / 15.0, 1e-20);
  const auto zero = sph_bessel_j_over_x(3, 0.0);
  EXPECT_DOUBLE_EQ(zero[1], 1.0 / 3.0);
}
