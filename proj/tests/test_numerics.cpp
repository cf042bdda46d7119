#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hetreg/error.hpp"
#include "hetreg/piecewise.hpp"
#include "hetreg/quadrature.hpp"
#include "hetreg/rng.hpp"
#include "oracles.hpp"

using namespace hetreg;
namespace qd = hetreg::quadrature;

TEST_CASE("quadrature integrates known integrals") {
  CHECK(qd::adaptive_simpson([](double x) { return x * x * x * x; }, 0.0, 1.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(qd::adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) ==
        doctest::Approx(2.0).epsilon(1e-10));
  const std::vector<double> kink{0.3};
  const double v = qd::integrate_pieces([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, kink);
  CHECK(v == doctest::Approx(0.5 * 0.09 + 0.5 * 0.49).epsilon(1e-12));
  // degree 9 is exact for five-point Gauss-Legendre
  CHECK(qd::gauss_legendre5([](double x) { return std::pow(x, 9); }, 0.0, 2.0) ==
        doctest::Approx(102.4).epsilon(1e-13));
  const double c1 = qd::composite_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 64);
  const double c2 = qd::composite_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 128);
  const double exact = std::exp(1.0) - 1.0;
  CHECK(std::abs(c2 - exact) < std::abs(c1 - exact) / 10.0);
}

TEST_CASE("segment derivatives agree with finite differences") {
  Rng rng(11);
  const std::vector<Segment> segs{
      {0.0, 1.0, SegmentKind::Constant, {0.7}},
      {0.0, 1.0, SegmentKind::Linear, {0.3, -1.2}},
      {0.0, 1.0, SegmentKind::Polynomial, {1.0, -2.0, 0.5, 3.0}},
      {0.0, 1.0, SegmentKind::Sine, {0.1, 1.5, 7.0, 0.2}},
      {0.0, 1.0, SegmentKind::Cosine, {-0.4, 0.8, 3.0, 0.6}},
  };
  for (const auto& s : segs) {
    for (int i = 0; i < 20; ++i) {
      const double x = rng.uniform(0.05, 0.95);
      const double h = 1e-5;
      CHECK(s.d1(x) == doctest::Approx(oracle::central_difference([&](double t) { return s.value(t); }, x, h))
                           .epsilon(1e-7));
      CHECK(s.d2(x) ==
            doctest::Approx(oracle::central_difference([&](double t) { return s.d1(t); }, x, h)).epsilon(1e-7));
    }
  }
}

TEST_CASE("piecewise function locates segments and validates layout") {
  PiecewiseFunction f({{0.0, 0.4, SegmentKind::Constant, {1.0}}, {0.4, 1.0, SegmentKind::Linear, {0.0, 2.0}}});
  CHECK(f(0.0) == 1.0);
  CHECK(f(0.399) == 1.0);
  CHECK(f(0.4) == doctest::Approx(0.8));
  CHECK(f(1.0) == doctest::Approx(2.0));
  CHECK(f.d1(0.7) == 2.0);
  REQUIRE(f.breakpoints().size() == 1);
  CHECK(f.breakpoints()[0] == 0.4);
  CHECK(f.derivative_mismatch() < 1e-6);

  CHECK_THROWS_AS(PiecewiseFunction(std::vector<Segment>{}), ContractViolation);
  CHECK_THROWS_AS(PiecewiseFunction({{0.0, 0.5, SegmentKind::Constant, {1.0}}}), ContractViolation);
  CHECK_THROWS_AS(PiecewiseFunction({{0.0, 0.4, SegmentKind::Constant, {1.0}}, {0.5, 1.0, SegmentKind::Constant, {1.0}}}),
                  ContractViolation);
  CHECK_THROWS_AS(PiecewiseFunction({{0.0, 1.0, SegmentKind::Linear, {1.0}}}), ContractViolation);
  CHECK_THROWS_AS(segment_kind_from_string("spline"), ContractViolation);
  CHECK(segment_kind_from_string(to_string(SegmentKind::Cosine)) == SegmentKind::Cosine);
}

TEST_CASE("rng streams are deterministic and well distributed") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  std::vector<double> u;
  for (int i = 0; i < 20000; ++i) u.push_back(r.uniform());
  CHECK(oracle::ks_statistic(u, [](double x) { return x; }) < 0.015);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}
