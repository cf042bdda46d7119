#include <doctest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "hetreg/domain.hpp"
#include "hetreg/error.hpp"
#include "hetreg/quadrature.hpp"
#include "oracles.hpp"

using namespace hetreg;

namespace {

ProblemSpec const_classification(double f) {
  return ProblemSpec(TaskKind::BinaryClassification, PiecewiseFunction::constant(f), PiecewiseFunction::constant(1.0));
}

double mass_below(const ProblemSpec& spec, double x) {
  return quadrature::integrate_pieces([&](double t) { return spec.q(t); }, 0.0, x, spec.density().breakpoints());
}

}  // namespace

TEST_CASE("conditional probability examples") {
  CHECK(cond_prob(const_classification(0.0), 0.3, 1.0) == doctest::Approx(0.5));
  CHECK(cond_prob(const_classification(std::log(3.0)), 0.3, 1.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(cond_prob(const_classification(800.0), 0.3, 1.0) == 1.0);
  CHECK(cond_prob(const_classification(-800.0), 0.3, -1.0) == 1.0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto spec = const_classification(rng.uniform(-30.0, 30.0));
    const double x = rng.uniform();
    CHECK(cond_prob(spec, x, 1.0) + cond_prob(spec, x, -1.0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  const auto reg = ProblemSpec(TaskKind::Regression, PiecewiseFunction::constant(0.0), PiecewiseFunction::constant(1.0),
                               PiecewiseFunction::constant(1.0));
  CHECK_THROWS_AS(cond_prob(reg, 0.5, 1.0), ContractViolation);
  CHECK_THROWS_AS(cond_prob(const_classification(0.0), 0.5, 0.0), ContractViolation);
}

TEST_CASE("fisher information examples and identity") {
  CHECK(fisher_info(const_classification(0.0), 0.2) == doctest::Approx(0.25));
  CHECK(fisher_info(const_classification(std::log(3.0)), 0.2) == doctest::Approx(0.1875).epsilon(1e-14));
  const auto reg = ProblemSpec(TaskKind::Regression, PiecewiseFunction::constant(3.0), PiecewiseFunction::constant(1.0),
                               PiecewiseFunction::constant(2.0));
  CHECK(fisher_info(reg, 0.9) == 1.0);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto spec = const_classification(rng.uniform(-20.0, 20.0));
    const double I = fisher_info(spec, 0.5);
    CHECK(I == doctest::Approx(cond_prob(spec, 0.5, 1.0) * cond_prob(spec, 0.5, -1.0)).epsilon(1e-12));
    CHECK(I > 0.0);
    CHECK(I <= 0.25);
  }
  CHECK_THROWS_AS(fisher_info(reg, 1.5), ContractViolation);
}

TEST_CASE("spec validation rejects malformed inputs") {
  const auto f = PiecewiseFunction::constant(0.0);
  CHECK_THROWS_AS(ProblemSpec(TaskKind::BinaryClassification, f, PiecewiseFunction::constant(0.9)), ContractViolation);
  CHECK_THROWS_AS(ProblemSpec(TaskKind::BinaryClassification, f,
                              PiecewiseFunction({{0.0, 1.0, SegmentKind::Linear, {2.0, -2.0}}})),
                  ContractViolation);
  CHECK_THROWS_AS(ProblemSpec(TaskKind::BinaryClassification, f,
                              PiecewiseFunction({{0.0, 1.0, SegmentKind::Sine, {1.0, 0.1, 6.283185307179586, 0.0}}})),
                  ContractViolation);
  CHECK_THROWS_AS(ProblemSpec(TaskKind::Regression, f, PiecewiseFunction::constant(1.0)), ContractViolation);
  CHECK_THROWS_AS(ProblemSpec(TaskKind::Regression, f, PiecewiseFunction::constant(1.0),
                              PiecewiseFunction({{0.0, 1.0, SegmentKind::Linear, {0.5, -1.0}}})),
                  ContractViolation);
}

TEST_CASE("group partition") {
  const auto p = GroupPartition::uniform(4);
  CHECK(p.size() == 4);
  CHECK(p.group_of(0.0) == 0);
  CHECK(p.group_of(0.25) == 1);
  CHECK(p.group_of(0.999) == 3);
  CHECK(p.group_of(1.0) == 3);
  CHECK_THROWS_AS(GroupPartition({0.0, 0.5, 0.5, 1.0}), ContractViolation);
  CHECK_THROWS_AS(GroupPartition({0.1, 1.0}), ContractViolation);
  CHECK_THROWS_AS(GroupPartition::uniform(0), ContractViolation);
}

TEST_CASE("dataset validation") {
  Dataset d{TaskKind::BinaryClassification, {{0.2, 1.0}, {0.5, -1.0}}, 0};
  CHECK_NOTHROW(d.validate());
  d.points.push_back({1.2, 1.0});
  CHECK_THROWS_AS(d.validate(), ContractViolation);
  Dataset e{TaskKind::BinaryClassification, {{0.2, 0.0}}, 0};
  CHECK_THROWS_AS(e.validate(), ContractViolation);
}

TEST_CASE("sampling is deterministic") {
  const auto spec = figure3_spec();
  const auto a = sample_dataset(spec, 500, 17);
  const auto b = sample_dataset(spec, 500, 17);
  const auto c = sample_dataset(spec, 500, 18);
  REQUIRE(a.size() == 500);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].y == b.points[i].y);
    differs = differs || a.points[i].x != c.points[i].x;
  }
  CHECK(differs);
}

TEST_CASE("uniform density passes a KS test") {
  const ProblemSpec spec(TaskKind::BinaryClassification, PiecewiseFunction::constant(0.0),
                         PiecewiseFunction::constant(1.0));
  const auto d = sample_dataset(spec, 100000, 1);
  std::vector<double> xs;
  for (const auto& p : d.points) xs.push_back(p.x);
  CHECK(oracle::ks_statistic(xs, [](double x) { return x; }) <= 0.01);
}

TEST_CASE("strong margin yields almost only positive labels") {
  const auto d = sample_dataset(const_classification(10.0), 100000, 2);
  double pos = 0.0;
  for (const auto& p : d.points) pos += p.y == 1.0;
  CHECK(pos / 100000.0 >= 0.9999 - 1e-4);
}

TEST_CASE("group frequencies match density masses (chi-square, 10 seeds)") {
  Rng rng(1234);
  for (int s = 0; s < 10; ++s) {
    const auto part = gen::partition(rng, 10);
    const auto spec = gen::classification_spec(rng, part.breakpoints());
    const auto d = sample_dataset(spec, 100000, derive_seed(99, s));
    std::vector<double> counts(part.size(), 0.0), probs;
    for (const auto& p : d.points) counts[part.group_of(p.x)] += 1.0;
    for (std::size_t j = 0; j < part.size(); ++j) probs.push_back(mass_below(spec, part.hi(j)) - mass_below(spec, part.lo(j)));
    CHECK(oracle::chi_square(counts, probs) < oracle::chi_square_999(9));
  }
}

TEST_CASE("linear densities: inverse CDF and KS") {
  Rng rng(77);
  for (int s = 0; s < 5; ++s) {
    const auto spec = gen::regression_spec(rng);
    for (double u : {0.0, 0.1, 0.5, 0.93, 1.0}) {
      CHECK(mass_below(spec, spec.inverse_cdf(u)) == doctest::Approx(u).epsilon(1e-10));
    }
    const auto d = sample_dataset(spec, 50000, s);
    std::vector<double> xs;
    for (const auto& p : d.points) xs.push_back(p.x);
    CHECK(oracle::ks_statistic(xs, [&](double x) { return mass_below(spec, x); }) < 0.01);
  }
}

TEST_CASE("regression noise has the configured spread") {
  const ProblemSpec spec(TaskKind::Regression, PiecewiseFunction::constant(1.0), PiecewiseFunction::constant(1.0),
                         PiecewiseFunction::constant(0.3));
  const auto d = sample_dataset(spec, 100000, 5);
  double s = 0.0, s2 = 0.0;
  for (const auto& p : d.points) {
    s += p.y - 1.0;
    s2 += (p.y - 1.0) * (p.y - 1.0);
  }
  CHECK(std::abs(s / 1e5) < 0.005);
  CHECK(std::sqrt(s2 / 1e5) == doctest::Approx(0.3).epsilon(0.01));
}

TEST_CASE("built-in specs have the advertised structure") {
  const auto f3 = figure3_spec();
  const auto h = halves_partition();
  auto mass = [&](const ProblemSpec& s, std::size_t j) { return mass_below(s, h.hi(j)) - mass_below(s, h.lo(j)); };
  CHECK(mass(f3, 0) >= 5.0 * mass(f3, 1));
  CHECK(f3.sigma(0.75) >= 5.0 * f3.sigma(0.25));
  CHECK(f3.fstar().derivative_mismatch() < 1e-6);
  const auto tg = two_group_classification_spec();
  CHECK(mass(tg, 0) == doctest::Approx(5.0 * mass(tg, 1)));
  CHECK(tg.fstar().derivative_mismatch() < 1e-6);
  CHECK_THROWS_AS(builtin_spec("nope"), ContractViolation);
  CHECK(builtin_spec("figure3").task() == TaskKind::Regression);
}
