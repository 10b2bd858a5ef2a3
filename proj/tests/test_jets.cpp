#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hambvp/jet.hpp"

using namespace hambvp;

namespace {

Jet2 random_jet(std::mt19937& rng, int s) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Jet2 j(u(rng), s);
  for (int i = 0; i < s; ++i) j.set_grad(i, u(rng));
  for (int i = 0; i < s; ++i)
    for (int k = 0; k <= i; ++k) j.set_hess(i, k, u(rng));
  return j;
}

}  // namespace

TEST_CASE("product rule on the worked example") {
  // a = (2, [1,0], 0), b = (3, [0,1], 0)
  Jet2 a = Jet2::variable(2.0, 2, 0);
  Jet2 b = Jet2::variable(3.0, 2, 1);
  Jet2 c = a * b;
  CHECK(c.value() == doctest::Approx(6.0));
  CHECK(c.grad(0) == doctest::Approx(3.0));
  CHECK(c.grad(1) == doctest::Approx(2.0));
  CHECK(c.hess(0, 1) == doctest::Approx(1.0));
  CHECK(c.hess(1, 0) == doctest::Approx(1.0));
  CHECK(c.hess(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("exp and cos at the origin") {
  Jet2 x = Jet2::variable(0.0, 1, 0);
  Jet2 e = exp(x);
  CHECK(e.value() == doctest::Approx(1.0));
  CHECK(e.grad(0) == doctest::Approx(1.0));
  CHECK(e.hess(0, 0) == doctest::Approx(1.0));
  Jet2 c = cos(x);
  CHECK(c.value() == doctest::Approx(1.0));
  CHECK(c.grad(0) == doctest::Approx(0.0));
  CHECK(c.hess(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("division by zero-valued jet throws") {
  Jet2 a(1.0, 1);
  Jet2 b(0.0, 1);
  CHECK_THROWS_AS(a / b, ArithmeticDomainError);
}

TEST_CASE("product rule holds componentwise for random jets") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 50; ++trial) {
    const int s = 3;
    Jet2 a = random_jet(rng, s);
    Jet2 b = random_jet(rng, s);
    Jet2 c = a * b;
    for (int i = 0; i < s; ++i) {
      CHECK(c.grad(i) ==
            doctest::Approx(a.value() * b.grad(i) + b.value() * a.grad(i))
                .epsilon(1e-12));
      for (int j = 0; j < s; ++j) {
        double expect = a.value() * b.hess(i, j) + b.value() * a.hess(i, j) +
                        a.grad(i) * b.grad(j) + a.grad(j) * b.grad(i);
        CHECK(c.hess(i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("chain rule matches analytic composite derivatives") {
  // f(g(x)) for f, g in {exp, cos, polynomial}, checked to 1e-12.
  std::mt19937 rng(777);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 40; ++trial) {
    double x0 = u(rng);
    Jet2 x = Jet2::variable(x0, 1, 0);

    // exp(cos(x)): d/dx = -sin x exp(cos x);
    // d2/dx2 = (sin^2 x - cos x) exp(cos x)
    Jet2 y = exp(cos(x));
    double v = std::exp(std::cos(x0));
    CHECK(y.value() == doctest::Approx(v).epsilon(1e-12));
    CHECK(y.grad(0) == doctest::Approx(-std::sin(x0) * v).epsilon(1e-12));
    CHECK(y.hess(0, 0) ==
          doctest::Approx((std::sin(x0) * std::sin(x0) - std::cos(x0)) * v)
              .epsilon(1e-12));

    // cos(x^2 + x): with w = x^2 + x, w' = 2x + 1, w'' = 2
    Jet2 z = cos(x * x + x);
    double w = x0 * x0 + x0, wp = 2 * x0 + 1;
    CHECK(z.value() == doctest::Approx(std::cos(w)).epsilon(1e-12));
    CHECK(z.grad(0) == doctest::Approx(-std::sin(w) * wp).epsilon(1e-12));
    CHECK(z.hess(0, 0) ==
          doctest::Approx(-std::cos(w) * wp * wp - std::sin(w) * 2.0)
              .epsilon(1e-12));

    // polynomial of exp: (exp x)^3 - 2 exp x
    Jet2 q = powi(exp(x), 3) - 2.0 * exp(x);
    double e = std::exp(x0);
    CHECK(q.value() == doctest::Approx(e * e * e - 2 * e).epsilon(1e-12));
    CHECK(q.grad(0) == doctest::Approx(3 * e * e * e - 2 * e).epsilon(1e-12));
    CHECK(q.hess(0, 0) ==
          doctest::Approx(9 * e * e * e - 2 * e).epsilon(1e-12));
  }
}

TEST_CASE("dual layer carries jet coefficients through") {
  // d/dp of H = p^2 q at (q, p) seeded jets: dH/dp = 2pq, and its
  // derivative w.r.t. the seed on q must be 2p.
  Jet2 qj = Jet2::variable(3.0, 1, 0);
  Jet2 pj(0.5, 1);
  Dual<Jet2> q(qj, 1);
  Dual<Jet2> p = Dual<Jet2>::variable(pj, 1, 0);
  Dual<Jet2> H = p * p * q;
  CHECK(H.du[0].value() == doctest::Approx(2 * 0.5 * 3.0));
  CHECK(H.du[0].grad(0) == doctest::Approx(2 * 0.5));
}

TEST_CASE("division and reciprocal jets") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    Jet2 a = random_jet(rng, 2);
    Jet2 b = random_jet(rng, 2);
    if (std::abs(b.value()) < 0.2) continue;
    Jet2 c = (a / b) * b;
    CHECK(c.value() == doctest::Approx(a.value()).epsilon(1e-12));
    for (int i = 0; i < 2; ++i)
      CHECK(c.grad(i) == doctest::Approx(a.grad(i)).epsilon(1e-11));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(c.hess(i, j) == doctest::Approx(a.hess(i, j)).epsilon(1e-10));
  }
}
