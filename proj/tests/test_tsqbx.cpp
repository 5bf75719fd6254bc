#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "gigaqbx/expansion.hpp"
#include "gigaqbx/tsqbx.hpp"

using namespace gigaqbx;

namespace {

Point3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Point3 v{g(rng), g(rng), g(rng)};
  return v / norm(v);
}

// Form-then-evaluate oracle from the expansion module.
complex_t via_expansion(const KernelSpec& spec, int p, const Point3& s, const Point3& sn, const Point3& c,
                        const Point3& t, const Point3& tn) {
  const std::vector<Point3> sv{s}, nv{sn};
  const std::vector<complex_t> w{1.0};
  return eval_local(p2l({sv, w, nv}, c, p, spec), t, spec, tn);
}

}  // namespace

TEST(TsEval, CollinearGeometricSum) {
  const TsConfig cfg{KernelSpec::laplace(), 2};
  const complex_t v = ts_eval(cfg, {0, 0, 1}, std::nullopt, {0, 0, 0}, {0, 0, 0.5}, std::nullopt);
  EXPECT_NEAR(v.real(), 1.75 / (4 * kPi), 1e-15);
  EXPECT_NEAR(v.real(), 0.139261, 1e-6);
}

TEST(TsEval, TargetAtCenter) {
  const TsConfig cfg{KernelSpec::laplace(), 7};
  const Point3 s{0.3, -1.2, 0.4};
  const complex_t v = ts_eval(cfg, s, std::nullopt, {0, 0, 0}, {0, 0, 0}, std::nullopt);
  EXPECT_NEAR(v.real(), kInv4Pi / norm(s), 1e-16);
  // gradients at r = 0
  const Point3 nu = normalized(Point3{1, 1, 0});
  const double R = norm(s);
  const complex_t g = ts_eval({KernelSpec::laplace(Variant::TargetNormalDeriv), 7}, s, std::nullopt, {0, 0, 0},
                              {0, 0, 0}, nu);
  EXPECT_NEAR(g.real(), kInv4Pi * dot(s / R, nu) / (R * R), 1e-16);
  const double k = 1.3;
  const complex_t gh = ts_eval({KernelSpec::helmholtz(k, Variant::TargetNormalDeriv), 7}, s, std::nullopt, {0, 0, 0},
                               {0, 0, 0}, nu);
  const auto hs = specfun::sph_bessel_all(1, k * R);
  const complex_t expect = complex_t(0, k * k) * kInv4Pi * hs.h[1] * dot(s / R, nu);
  EXPECT_LE(std::abs(gh - expect), 1e-15);
}

TEST(TsEval, IdentityWithSphericalHarmonicForm) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0, 1);
  for (const KernelSpec base : {KernelSpec::laplace(), KernelSpec::helmholtz(2.0)}) {
    for (const Variant v : {Variant::SingleLayer, Variant::TargetNormalDeriv, Variant::SourceNormalDeriv}) {
      KernelSpec spec = base;
      spec.variant = v;
      for (int trial = 0; trial < 100; ++trial) {
        const Point3 c{u(rng), u(rng), u(rng)};
        const double R = 0.2 + 2.0 * u(rng);
        const Point3 s = c + random_unit(rng) * R;
        const Point3 t = c + random_unit(rng) * (R * u(rng));
        const Point3 sn = random_unit(rng), tn = random_unit(rng);
        const complex_t ts = ts_eval({spec, 8}, s, sn, c, t, tn);
        const complex_t ex = via_expansion(spec, 8, s, sn, c, t, tn);
        EXPECT_LE(std::abs(ts - ex), 1e-11 * std::max(1.0, std::abs(ts))) << variant_name(v);
        if (base.equation == Equation::Laplace) {
          EXPECT_EQ(ts.imag(), 0.0);
        }
      }
    }
  }
}

TEST(TsEval, ConvergesToKernel) {
  std::mt19937_64 rng(3);
  const Point3 c{0, 0, 0};
  const Point3 s = random_unit(rng), t = random_unit(rng) * 0.5;
  const complex_t exact = kernel_value(KernelSpec::laplace(), t, std::nullopt, s, std::nullopt);
  double prev = 1e300;
  for (int p = 0; p <= 30; p += 5) {
    const double err = std::abs(ts_eval({KernelSpec::laplace(), p}, s, std::nullopt, c, t, std::nullopt) - exact);
    EXPECT_LE(err, 4.0 * std::pow(0.5, p + 1) * std::abs(exact));
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(TsEval, Errors) {
  const TsConfig cfg{KernelSpec::laplace(), 3};
  EXPECT_THROW(ts_eval(cfg, {1, 0, 0}, std::nullopt, {0, 0, 0}, {0, 2, 0}, std::nullopt), DomainError);
  EXPECT_THROW(ts_eval(cfg, {0, 0, 0}, std::nullopt, {0, 0, 0}, {0, 0, 0}, std::nullopt), NumericalError);
  EXPECT_THROW(ts_eval({KernelSpec::laplace(Variant::SourceNormalDeriv), 3}, {1, 0, 0}, std::nullopt, {0, 0, 0},
                       {0, 0.1, 0}, std::nullopt),
               ValidationError);
}

TEST(TsAccumulate, EmptyAndSingle) {
  const TsConfig cfg{KernelSpec::laplace(), 4};
  EXPECT_EQ(ts_accumulate(cfg, {}, {}, {}, {0, 0, 0}, {0.1, 0, 0}, std::nullopt), 0.0);
  const std::vector<Point3> s{{0, 1, 0}};
  const std::vector<complex_t> w{{0.5, 2.0}};
  EXPECT_EQ(ts_accumulate(cfg, s, w, {}, {0, 0, 0}, {0.1, 0, 0}, std::nullopt),
            w[0] * ts_eval(cfg, s[0], std::nullopt, {0, 0, 0}, {0.1, 0, 0}, std::nullopt));
}

TEST(TsAccumulate, MatchesDipoleExpansionPipeline) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point3> s, n;
  std::vector<complex_t> w;
  const Point3 c{0, 0, 0}, t{0.05, -0.1, 0.08};
  for (int i = 0; i < 500; ++i) {
    s.push_back(random_unit(rng) * (0.5 + std::fabs(u(rng))));
    n.push_back(random_unit(rng));
    w.push_back(u(rng));
  }
  const auto spec = KernelSpec::laplace(Variant::SourceNormalDeriv);
  const complex_t ts = ts_accumulate({spec, 5}, s, w, n, c, t, std::nullopt);
  const complex_t ex = eval_local(p2l({s, w, n}, c, 5, spec), t);
  EXPECT_LE(std::abs(ts - ex), 1e-11 * std::abs(ex));
}
