#include "hetreg/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "hetreg/error.hpp"
#include "hetreg/quadrature.hpp"
#include "hetreg/rng.hpp"

namespace hetreg {
namespace {

constexpr double kPi = std::numbers::pi;

double segment_mass(const Segment& s) {
  if (s.kind == SegmentKind::Constant) return s.params[0] * (s.hi - s.lo);
  // linear a + b x
  const double a = s.params[0];
  const double b = s.params[1];
  return a * (s.hi - s.lo) + 0.5 * b * (s.hi * s.hi - s.lo * s.lo);
}

std::vector<double> merge_breakpoints(std::initializer_list<std::vector<double>> lists) {
  std::vector<double> out;
  for (const auto& l : lists) out.insert(out.end(), l.begin(), l.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::string_view to_string(TaskKind task) {
  return task == TaskKind::BinaryClassification ? "classification" : "regression";
}

TaskKind task_kind_from_string(std::string_view name) {
  if (name == "classification") return TaskKind::BinaryClassification;
  if (name == "regression") return TaskKind::Regression;
  throw ContractViolation(fmt::format("unknown task kind '{}'", name));
}

ProblemSpec::ProblemSpec(TaskKind task, PiecewiseFunction fstar, PiecewiseFunction density,
                         std::optional<PiecewiseFunction> noise_sigma)
    : task_(task), fstar_(std::move(fstar)), density_(std::move(density)), sigma_(std::move(noise_sigma)) {
  if (fstar_.empty() || density_.empty()) throw ContractViolation("spec needs f* and a density");

  for (const auto& s : density_.segments()) {
    if (s.kind != SegmentKind::Constant && s.kind != SegmentKind::Linear) {
      throw ContractViolation("density must be piecewise constant or piecewise linear");
    }
    if (!(s.value(s.lo) > 0.0) || !(s.value(s.hi) > 0.0)) {
      throw ContractViolation(fmt::format("density is not positive on [{}, {}]", s.lo, s.hi));
    }
  }
  const auto dens_bp = density_.breakpoints();
  const double total = quadrature::integrate_pieces([this](double x) { return density_(x); }, 0.0, 1.0,
                                                    dens_bp);
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractViolation(fmt::format("density integrates to {:.12g}, not 1", total));
  }
  double acc = 0.0;
  for (const auto& s : density_.segments()) {
    acc += segment_mass(s);
    cumulative_mass_.push_back(acc);
  }

  const double mismatch = fstar_.derivative_mismatch();
  if (mismatch >= 1e-6) {
    throw ContractViolation(
        fmt::format("f* derivatives disagree with finite differences (rel. error {:.3g})", mismatch));
  }

  if (task_ == TaskKind::Regression) {
    if (!sigma_) throw ContractViolation("regression spec needs noise_sigma");
  }
  if (sigma_) {
    for (const auto& s : sigma_->segments()) {
      for (int k = 0; k <= 64; ++k) {
        const double x = s.lo + (s.hi - s.lo) * k / 64.0;
        if (!(s.value(x) >= 0.0)) throw ContractViolation("noise_sigma must be >= 0");
      }
    }
  }
}

double ProblemSpec::sigma(double x) const { return sigma_ ? (*sigma_)(x) : 0.0; }

std::vector<double> ProblemSpec::breakpoints() const {
  return merge_breakpoints({fstar_.breakpoints(), density_.breakpoints(),
                            sigma_ ? sigma_->breakpoints() : std::vector<double>{}});
}

double ProblemSpec::inverse_cdf(double u) const {
  const auto& segs = density_.segments();
  const double target = std::clamp(u, 0.0, 1.0) * cumulative_mass_.back();
  auto it = std::lower_bound(cumulative_mass_.begin(), cumulative_mass_.end(), target);
  std::size_t i = std::min<std::size_t>(it - cumulative_mass_.begin(), segs.size() - 1);
  const auto& s = segs[i];
  const double before = i == 0 ? 0.0 : cumulative_mass_[i - 1];
  const double m = std::max(0.0, target - before);
  double x;
  if (s.kind == SegmentKind::Constant) {
    x = s.lo + m / s.params[0];
  } else {
    // Solve d0 t + (b/2) t^2 = m for t = x - lo, with d0 = q(lo) > 0.
    const double b = s.params[1];
    const double d0 = s.value(s.lo);
    x = s.lo + 2.0 * m / (d0 + std::sqrt(std::max(0.0, d0 * d0 + 2.0 * b * m)));
  }
  return std::clamp(x, s.lo, s.hi);
}

GroupPartition::GroupPartition(std::vector<double> breakpoints) : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.size() < 2) throw ContractViolation("partition needs at least one group");
  if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0) {
    throw ContractViolation("partition must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i - 1] < breakpoints_[i])) {
      throw ContractViolation("partition breakpoints must be strictly ascending");
    }
  }
}

GroupPartition GroupPartition::uniform(std::size_t groups) {
  if (groups == 0) throw ContractViolation("partition needs at least one group");
  std::vector<double> bp(groups + 1);
  for (std::size_t j = 0; j <= groups; ++j) bp[j] = static_cast<double>(j) / static_cast<double>(groups);
  bp.back() = 1.0;
  return GroupPartition(std::move(bp));
}

std::size_t GroupPartition::group_of(double x) const {
  auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, x);
  return static_cast<std::size_t>(it - (breakpoints_.begin() + 1));
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.x >= 0.0 && p.x <= 1.0)) {
      throw ContractViolation(fmt::format("example {} has x = {} outside [0, 1]", i, p.x));
    }
    if (task == TaskKind::BinaryClassification && p.y != 1.0 && p.y != -1.0) {
      throw ContractViolation(fmt::format("example {} has label {} (expected -1 or +1)", i, p.y));
    }
    if (!std::isfinite(p.y)) throw ContractViolation(fmt::format("example {} has a non-finite label", i));
  }
}

double cond_prob(const ProblemSpec& spec, double x, double y) {
  if (spec.task() != TaskKind::BinaryClassification) {
    throw ContractViolation("cond_prob needs a classification spec");
  }
  if (y != 1.0 && y != -1.0) throw ContractViolation("label must be -1 or +1");
  const double margin = y * spec.f(x);
  // 1 / (1 + e^{-m}) without overflow for large |m|
  if (margin >= 0.0) return 1.0 / (1.0 + std::exp(-margin));
  const double e = std::exp(margin);
  return e / (1.0 + e);
}

double logistic_fisher(double f) {
  const double e = std::exp(-std::abs(f));
  return e / ((1.0 + e) * (1.0 + e));
}

double fisher_info(const ProblemSpec& spec, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw ContractViolation("fisher_info needs x in [0, 1]");
  if (spec.task() == TaskKind::Regression) return 1.0;
  return logistic_fisher(spec.f(x));
}

Dataset sample_dataset(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ContractViolation("sample_dataset needs n >= 1");
  Rng rng(seed);
  Dataset data;
  data.task = spec.task();
  data.seed = seed;
  data.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = spec.inverse_cdf(rng.uniform());
    double y;
    if (spec.task() == TaskKind::BinaryClassification) {
      y = rng.uniform() < cond_prob(spec, x, 1.0) ? 1.0 : -1.0;
    } else {
      y = spec.f(x) + spec.sigma(x) * rng.normal();
    }
    data.points.push_back({x, y});
  }
  return data;
}

ProblemSpec figure3_spec() {
  PiecewiseFunction fstar({
      Segment{0.0, 0.5, SegmentKind::Sine, {0.0, 1.0, 12.0 * kPi, 0.0}},
      Segment{0.5, 1.0, SegmentKind::Constant, {0.5}},
  });
  PiecewiseFunction density({
      Segment{0.0, 0.5, SegmentKind::Constant, {1.8}},
      Segment{0.5, 1.0, SegmentKind::Constant, {0.2}},
  });
  PiecewiseFunction sigma({
      Segment{0.0, 0.5, SegmentKind::Constant, {0.05}},
      Segment{0.5, 1.0, SegmentKind::Constant, {0.5}},
  });
  return ProblemSpec(TaskKind::Regression, std::move(fstar), std::move(density), std::move(sigma));
}

ProblemSpec two_group_classification_spec() {
  PiecewiseFunction fstar({
      Segment{0.0, 0.35, SegmentKind::Constant, {4.0}},
      Segment{0.35, 0.5, SegmentKind::Cosine, {2.3, 1.7, kPi / 0.15, 0.35}},
      Segment{0.5, 1.0, SegmentKind::Cosine, {0.0, 0.6, 2.0 * kPi, 0.5}},
  });
  PiecewiseFunction density({
      Segment{0.0, 0.5, SegmentKind::Constant, {5.0 / 3.0}},
      Segment{0.5, 1.0, SegmentKind::Constant, {1.0 / 3.0}},
  });
  return ProblemSpec(TaskKind::BinaryClassification, std::move(fstar), std::move(density));
}

GroupPartition halves_partition() { return GroupPartition({0.0, 0.5, 1.0}); }

ProblemSpec builtin_spec(std::string_view name) {
  if (name == "figure3") return figure3_spec();
  if (name == "two_group_classification") return two_group_classification_spec();
  throw ContractViolation(fmt::format("unknown built-in spec '{}'", name));
}

}  // namespace hetreg
