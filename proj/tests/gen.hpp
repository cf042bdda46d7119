#pragma once

// Hand-rolled generators for property tests, all driven by hetreg::Rng.

#include <cmath>
#include <numbers>
#include <vector>

#include "hetreg/domain.hpp"
#include "hetreg/rng.hpp"

namespace gen {

inline double log_uniform(hetreg::Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

// Ascending breakpoints 0 < ... < 1 with k groups, no group narrower than 0.02.
inline hetreg::GroupPartition partition(hetreg::Rng& rng, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) total += (x = 0.2 + rng.uniform());
  std::vector<double> bp{0.0};
  for (std::size_t j = 0; j + 1 < k; ++j) bp.push_back(bp.back() + w[j] / total);
  bp.push_back(1.0);
  return hetreg::GroupPartition(bp);
}

// Piecewise-constant density with positive values on the given breakpoints.
inline hetreg::PiecewiseFunction step_density(hetreg::Rng& rng, const std::vector<double>& bp) {
  std::vector<double> v;
  double mass = 0.0;
  for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
    v.push_back(log_uniform(rng, 0.2, 5.0));
    mass += v.back() * (bp[j + 1] - bp[j]);
  }
  std::vector<hetreg::Segment> segs;
  for (std::size_t j = 0; j + 1 < bp.size(); ++j) {
    segs.push_back({bp[j], bp[j + 1], hetreg::SegmentKind::Constant, {v[j] / mass}});
  }
  return hetreg::PiecewiseFunction(segs);
}

// Linear density a + b x on [0, 1] with a, a + b > 0 and unit mass.
inline hetreg::PiecewiseFunction linear_density(hetreg::Rng& rng) {
  const double slope = rng.uniform(-1.8, 1.8);
  return hetreg::PiecewiseFunction({{0.0, 1.0, hetreg::SegmentKind::Linear, {1.0 - 0.5 * slope, slope}}});
}

// Smooth f* = offset + amp sin(freq (x - shift)); f*'' vanishes only at isolated points.
inline hetreg::PiecewiseFunction smooth_fstar(hetreg::Rng& rng, double max_amp = 2.0) {
  const double amp = rng.uniform(0.2, max_amp);
  const double freq = rng.uniform(1.0, 3.0 * std::numbers::pi);
  const double shift = rng.uniform(0.0, 1.0);
  const double off = rng.uniform(-1.0, 1.0);
  return hetreg::PiecewiseFunction({{0.0, 1.0, hetreg::SegmentKind::Sine, {off, amp, freq, shift}}});
}

inline hetreg::ProblemSpec classification_spec(hetreg::Rng& rng, const std::vector<double>& density_bp) {
  return hetreg::ProblemSpec(hetreg::TaskKind::BinaryClassification, smooth_fstar(rng), step_density(rng, density_bp));
}

inline hetreg::ProblemSpec regression_spec(hetreg::Rng& rng) {
  return hetreg::ProblemSpec(hetreg::TaskKind::Regression, smooth_fstar(rng), linear_density(rng),
                             hetreg::PiecewiseFunction::constant(rng.uniform(0.05, 0.5)));
}

}  // namespace gen
