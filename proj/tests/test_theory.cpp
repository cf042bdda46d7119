#include <doctest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "hetreg/error.hpp"
#include "hetreg/regprofile.hpp"
#include "hetreg/theory.hpp"
#include "oracles.hpp"

using namespace hetreg;

TEST_CASE("L0 constant") {
  CHECK(l0_constant() == 0.25);
  CHECK(std::abs(l0_quadrature() - 0.25) < 1e-10);
  CHECK(std::abs(l0_composite(8000) - l0_composite(16000)) < 1e-10);
  CHECK(std::abs(l0_composite(8000) - 0.25) < 1e-10);
  CHECK(l0_tail_bound(40.0) < 1e-34);
}

TEST_CASE("flat f* with q = 1 and I = 1/4: variance 0.5, no bias") {
  const ProblemSpec spec(TaskKind::BinaryClassification, PiecewiseFunction({{0.0, 1.0, SegmentKind::Linear, {0.0, 0.0}}}),
                         PiecewiseFunction::constant(1.0));
  const auto r = asymptotic_mse(spec, uniform_profile(GroupPartition::uniform(1), 1.0), 1.0);
  CHECK(r.bias_term == 0.0);
  CHECK(r.variance_term == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("homogeneity: rho -> c rho, lambda -> lambda / c") {
  Rng rng(41);
  for (int s = 0; s < 10; ++s) {
    const auto part = gen::partition(rng, 3);
    const auto spec = gen::classification_spec(rng, part.breakpoints());
    const auto prof = optimal_rho(spec, part);
    const double lam = gen::log_uniform(rng, 0.1, 10.0);
    const auto base = asymptotic_mse(spec, prof, lam);
    for (double c : {0.5, 2.0, 10.0}) {
      std::vector<double> rho = prof.rho;
      for (double& v : rho) v *= c;
      const auto r = asymptotic_mse(spec, RegProfile(part, rho), lam / c);
      CHECK(oracle::rel_err(r.bias_term, base.bias_term) < 1e-10);
      CHECK(oracle::rel_err(r.variance_term * std::sqrt(c), base.variance_term) < 1e-10);
    }
    CHECK(base.total == doctest::Approx(base.bias_term + base.variance_term).epsilon(1e-12));
  }
}

TEST_CASE("optimal profile beats every uniform level") {
  Rng rng(42);
  for (int s = 0; s < 10; ++s) {
    const auto part = gen::partition(rng, 4);
    const auto spec = s % 2 ? gen::regression_spec(rng) : gen::classification_spec(rng, part.breakpoints());
    const double opt = asymptotic_mse(spec, optimal_rho(spec, part), 1.0).total;
    for (int k = 0; k < 50; ++k) {
      const double level = std::pow(10.0, -4.0 + 8.0 * k / 49.0);
      CHECK(opt <= asymptotic_mse(spec, uniform_profile(part, level), 1.0).total * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("each group's rho minimizes its own term") {
  Rng rng(43);
  const auto part = gen::partition(rng, 5);
  const auto spec = gen::classification_spec(rng, part.breakpoints());
  const auto r = asymptotic_mse(spec, optimal_rho(spec, part), 1.0);
  for (const auto& g : r.groups) {
    CHECK(oracle::rel_err(g.rho, oracle::numeric_rho(g.A, g.B)) < 1e-6);
  }
}

TEST_CASE("additivity over a refinement") {
  Rng rng(44);
  for (int s = 0; s < 5; ++s) {
    const auto spec = gen::regression_spec(rng);
    const GroupPartition coarse({0.0, 0.4, 1.0});
    const GroupPartition fine({0.0, 0.15, 0.4, 0.55, 0.8, 1.0});
    const RegProfile pc(coarse, {0.7, 2.0});
    const RegProfile pf(fine, {0.7, 0.7, 2.0, 2.0, 2.0});
    const auto a = asymptotic_mse(spec, pc, 0.8);
    const auto b = asymptotic_mse(spec, pf, 0.8);
    CHECK(oracle::rel_err(b.total, a.total) < 1e-10);
  }
}

TEST_CASE("pointwise profiles are unsupported") {
  Rng rng(45);
  const auto spec = gen::regression_spec(rng);
  CHECK_THROWS_AS(asymptotic_mse(spec, PointwiseProfile{[](double x) { return 1.0 + x; }}, 1.0), UnsupportedProfile);
}

TEST_CASE("ridge and lambda schedules") {
  CHECK(ridge_lambda_opt(10, 1.0, 100, 1.0) == doctest::Approx(0.1));
  CHECK(ridge_lambda_opt(10, 1.0, 200, 1.0) == doctest::Approx(0.05));
  for (std::size_t n : {10u, 1000u, 123457u}) {
    CHECK(lambda_schedule(2.0, n) * std::pow(static_cast<double>(n), 0.4) == doctest::Approx(2.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(ridge_lambda_opt(10, 1.0, 0, 1.0), ContractViolation);
}
