#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hetreg/piecewise.hpp"

namespace hetreg {

enum class TaskKind { BinaryClassification, Regression };

std::string_view to_string(TaskKind task);
TaskKind task_kind_from_string(std::string_view name);

// Generative truth of a 1-D experiment: ground truth f*, input density q and,
// for regression, the label noise standard deviation sigma(x).
//
// Invariants checked on construction:
//   * q integrates to 1 within 1e-9 and is strictly positive on [0, 1]
//   * q is piecewise constant or piecewise linear
//   * supplied derivatives of f* agree with finite differences (rel. < 1e-6)
//   * sigma >= 0 (regression only; required there)
class ProblemSpec {
 public:
  ProblemSpec(TaskKind task, PiecewiseFunction fstar, PiecewiseFunction density,
              std::optional<PiecewiseFunction> noise_sigma = std::nullopt);

  TaskKind task() const { return task_; }
  const PiecewiseFunction& fstar() const { return fstar_; }
  const PiecewiseFunction& density() const { return density_; }
  const std::optional<PiecewiseFunction>& noise_sigma() const { return sigma_; }

  double f(double x) const { return fstar_(x); }
  double df(double x) const { return fstar_.d1(x); }
  double d2f(double x) const { return fstar_.d2(x); }
  double q(double x) const { return density_(x); }
  double sigma(double x) const;

  // Union of the interior breakpoints of f*, q and sigma, sorted.
  std::vector<double> breakpoints() const;

  // Inverse of the cumulative distribution of q.
  double inverse_cdf(double u) const;

 private:
  TaskKind task_;
  PiecewiseFunction fstar_;
  PiecewiseFunction density_;
  std::optional<PiecewiseFunction> sigma_;
  std::vector<double> cumulative_mass_;  // mass up to the end of each density segment
};

// Breakpoints 0 = a_0 < a_1 < ... < a_k = 1. Group j is [a_j, a_{j+1}); the
// last group also owns x = 1.
class GroupPartition {
 public:
  explicit GroupPartition(std::vector<double> breakpoints);

  static GroupPartition uniform(std::size_t groups);

  std::size_t size() const { return breakpoints_.size() - 1; }
  double lo(std::size_t j) const { return breakpoints_[j]; }
  double hi(std::size_t j) const { return breakpoints_[j + 1]; }
  double width(std::size_t j) const { return hi(j) - lo(j); }
  std::size_t group_of(double x) const;
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  bool operator==(const GroupPartition&) const = default;

 private:
  std::vector<double> breakpoints_;
};

struct Sample {
  double x;
  double y;
};

// Labels are +-1 for classification.
struct Dataset {
  TaskKind task = TaskKind::Regression;
  std::vector<Sample> points;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

// Pr[Y = y | X = x] = 1 / (1 + exp(-y f*(x))).
double cond_prob(const ProblemSpec& spec, double x, double y);

// Var(Y | X = x) for the logistic model; 1 for regression (square loss).
double fisher_info(const ProblemSpec& spec, double x);

// Logistic-model Fisher information at margin f.
double logistic_fisher(double f);

Dataset sample_dataset(const ProblemSpec& spec, std::size_t n, std::uint64_t seed);

// Regression demo: oscillating, frequent, clean left half; flat, rare, noisy
// right half. The functional form is an interpretation of the qualitative
// description of the one-dimensional toy example, not a published formula.
ProblemSpec figure3_spec();

// Two-group classification benchmark with a clean, dense left group and a
// noisy, rare right group (q ratio 5, group-mean Fisher information ratio
// above 5). f* is C1 with zero slope at 0, 0.5 and 1.
ProblemSpec two_group_classification_spec();

// Partition matching both built-in specs: [0, 0.5) and [0.5, 1].
GroupPartition halves_partition();

// Built-in spec by name: "figure3" or "two_group_classification".
ProblemSpec builtin_spec(std::string_view name);

}  // namespace hetreg
