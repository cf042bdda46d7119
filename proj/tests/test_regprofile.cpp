#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gen.hpp"
#include "hetreg/error.hpp"
#include "hetreg/quadrature.hpp"
#include "hetreg/regprofile.hpp"
#include "hetreg/theory.hpp"
#include "oracles.hpp"

using namespace hetreg;

TEST_CASE("optimal rho closed form examples") {
  CHECK(optimal_rho_value(1.0, 4.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(optimal_rho_value(1.0, 128.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(oracle::rel_err(oracle::numeric_rho(1.0, 128.0), 4.0) < 1e-8);
  CHECK(optimal_rho_value(0.0, 1.0) == kRhoMax);
}

TEST_CASE("closed form matches golden-section search on random (A, B)") {
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const double A = gen::log_uniform(rng, 1e-6, 1e6);
    const double B = gen::log_uniform(rng, 1e-6, 1e6);
    CHECK(oracle::rel_err(optimal_rho_value(A, B), oracle::numeric_rho(A, B)) < 1e-8);
  }
}

TEST_CASE("linear f* on a group gives a capped profile") {
  const ProblemSpec spec(TaskKind::BinaryClassification,
                         PiecewiseFunction({{0.0, 0.5, SegmentKind::Linear, {0.0, 1.0}},
                                            {0.5, 1.0, SegmentKind::Sine, {0.5, 0.3, 6.0, 0.5}}}),
                         PiecewiseFunction::constant(1.0));
  const auto prof = optimal_rho(spec, halves_partition());
  CHECK(prof.rho[0] == kRhoMax);
  CHECK(prof.capped[0]);
  CHECK_FALSE(prof.capped[1]);
  CHECK(prof.rho[1] < kRhoMax);
}

TEST_CASE("scaling the uncertainty by c scales rho by c^{3/5}") {
  Rng rng(8);
  for (int s = 0; s < 20; ++s) {
    const auto part = gen::partition(rng, 3);
    const auto spec = gen::classification_spec(rng, part.breakpoints());
    const auto base = optimal_rho(spec, part);
    const double c = gen::log_uniform(rng, 0.1, 10.0);
    const auto scaled = optimal_rho(spec, part, [&](double x) { return c * fisher_info(spec, x); });
    for (std::size_t j = 0; j < part.size(); ++j) {
      CHECK(oracle::rel_err(scaled.rho[j], std::pow(c, 0.6) * base.rho[j]) < 1e-9);
    }
  }
}

TEST_CASE("group coefficients are stable under refinement") {
  Rng rng(31);
  for (int s = 0; s < 5; ++s) {
    const auto spec = gen::regression_spec(rng);
    const auto c = group_coefficients(spec, 0.1, 0.7);
    auto r = [&](double t) { return 1.0 / spec.q(t); };
    auto a_int = [&](double t) { return r(t) * r(t) * spec.d2f(t) * spec.d2f(t); };
    auto b_int = [&](double t) { return 0.25 * std::sqrt(r(t)); };
    const double a1 = quadrature::composite_simpson(a_int, 0.1, 0.7, 4096);
    const double a2 = quadrature::composite_simpson(a_int, 0.1, 0.7, 8192);
    const double b2 = quadrature::composite_simpson(b_int, 0.1, 0.7, 8192);
    CHECK(oracle::rel_err(a2, a1) < 1e-7);
    CHECK(oracle::rel_err(c.A, a2) < 1e-7);
    CHECK(oracle::rel_err(c.B, b2) < 1e-7);
  }
}

TEST_CASE("simplified rho and tau values") {
  CHECK(simplified_rho(std::pow(2.0, -5), std::pow(2.0, -5)) == std::pow(2.0, -6));
  CHECK(tau_value(std::pow(2.0, -5), std::pow(2.0, -5)) == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double q = gen::log_uniform(rng, 1e-3, 1e3);
    const double I = gen::log_uniform(rng, 1e-3, 1.0);
    CHECK(tau_value(q, I) * q == simplified_rho(q, I));
    CHECK(simplified_rho(q, 2.0 * I) > simplified_rho(q, I));
    CHECK(oracle::rel_err(simplified_rho(q, I), std::pow(q * I, 0.6)) < 1e-13);
  }
}

TEST_CASE("tau weights follow the group estimates") {
  const auto part = halves_partition();
  Dataset reg{TaskKind::Regression, {{0.1, 0.0}, {0.7, 0.0}, {0.3, 1.0}}, 0};
  const std::vector<double> q{1.6, 0.4}, I{1.0, 1.0};
  const auto w = tau_weights(reg, part, q, I);
  REQUIRE(w.size() == 3);
  CHECK(w.tau[0] == doctest::Approx(std::pow(1.6, -0.4)).epsilon(1e-14));
  CHECK(w.tau[1] == doctest::Approx(std::pow(0.4, -0.4)).epsilon(1e-14));
  CHECK(w.tau[1] > w.tau[0]);
  CHECK(w.tau[2] == w.tau[0]);

  const std::vector<std::optional<double>> q_opt{1.6, std::nullopt}, I_opt{1.0, std::nullopt};
  try {
    tau_weights(reg, part, q_opt, I_opt);
    FAIL("expected an error");
  } catch (const ContractViolation& e) {
    CHECK(std::string(e.what()).find("group 1") != std::string::npos);
  }
  Dataset left_only{TaskKind::Regression, {{0.1, 0.0}}, 0};
  CHECK_NOTHROW(tau_weights(left_only, part, q_opt, I_opt));
}

TEST_CASE("profiles and group statistics") {
  const auto part = GroupPartition({0.0, 0.25, 1.0});
  const auto u = uniform_profile(part, 2.0);
  CHECK(u.at(0.1) == 2.0);
  CHECK(u.at(1.0) == 2.0);
  CHECK(mean_rho(u) == doctest::Approx(2.0));
  const RegProfile p(part, {1.0, 3.0});
  CHECK(mean_rho(p) == doctest::Approx(2.5));
  CHECK(mean_rho(rescaled(p, 5.0)) == doctest::Approx(5.0));
  CHECK(rescaled(p, 5.0).rho[1] / rescaled(p, 5.0).rho[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(RegProfile(part, {1.0}), ContractViolation);
  CHECK_THROWS_AS(RegProfile(part, {1.0, -1.0}), ContractViolation);

  const ProblemSpec spec(TaskKind::Regression, PiecewiseFunction::constant(0.0),
                         PiecewiseFunction({{0.0, 0.25, SegmentKind::Constant, {2.0}},
                                            {0.25, 1.0, SegmentKind::Constant, {2.0 / 3.0}}}),
                         PiecewiseFunction::constant(1.0));
  const auto st = population_group_stats(spec, part);
  CHECK(st.q[0] == doctest::Approx(2.0));
  CHECK(st.q[1] == doctest::Approx(2.0 / 3.0));
  CHECK(st.I[0] == doctest::Approx(1.0));
  const auto simp = simplified_profile(st, part);
  const auto inv = inverse_profile(st, part);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(simp.rho[j] == simplified_rho(st.q[j], st.I[j]));
    CHECK(inv.rho[j] == doctest::Approx(1.0 / simp.rho[j]));
  }
}

TEST_CASE("single group partition is a uniform profile") {
  Rng rng(12);
  const auto spec = gen::regression_spec(rng);
  const auto prof = optimal_rho(spec, GroupPartition::uniform(1));
  REQUIRE(prof.rho.size() == 1);
  CHECK(prof.at(0.0) == prof.at(1.0));
}
