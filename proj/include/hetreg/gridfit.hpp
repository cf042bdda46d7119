#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "hetreg/domain.hpp"
#include "hetreg/error.hpp"
#include "hetreg/regprofile.hpp"

namespace hetreg {

// Piecewise-linear function on the uniform grid t_u = u / (m - 1).
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(std::vector<double> values);

  static GridFunction sampled(std::size_t m, const std::function<double(double)>& f);

  std::size_t size() const { return values_.size(); }
  double spacing() const { return 1.0 / static_cast<double>(values_.size() - 1); }
  double node(std::size_t u) const;
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Cell holding t: [t_c, t_{c+1}); the last cell also owns t = 1.
  std::size_t cell_of(double t) const;
  double slope(std::size_t cell) const { return (values_[cell + 1] - values_[cell]) / spacing(); }
  double operator()(double t) const;

 private:
  std::vector<double> values_;
};

enum class PenaltyKind { IntegralRho, PerExampleTau };

struct FitConfig {
  std::size_t m = 257;
  double lambda = 1.0;
  std::size_t max_iters = 500;
  double grad_tol = 1e-10;
  PenaltyKind penalty_kind = PenaltyKind::IntegralRho;
  double value_cap = 50.0;
  bool keep_log = false;

  void validate() const;
};

// IntegralRho pairs with a RegProfile, PerExampleTau with ExampleWeights.
using Regularizer = std::variant<RegProfile, ExampleWeights>;

// Objective
//   (1/n) sum_i l(g(x_i), y_i) + lambda * P(g)
// with P = sum_cells rho(cell) slope^2 dt            (IntegralRho)
//   or P = (1/n) sum_i tau_i slope(cell(x_i))^2     (PerExampleTau).
// l is log(1 + exp(-y a)) for classification and (y - a)^2 / 2 for regression.
double objective(const Dataset& data, const Regularizer& reg, const FitConfig& config, const GridFunction& g);
std::vector<double> objective_gradient(const Dataset& data, const Regularizer& reg, const FitConfig& config,
                                       const GridFunction& g);

// Loss and penalty parts of the objective, penalty without lambda.
struct ObjectiveParts {
  double loss = 0.0;
  double penalty = 0.0;
};
ObjectiveParts objective_parts(const Dataset& data, const Regularizer& reg, const FitConfig& config,
                               const GridFunction& g);

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
};

struct FitResult {
  GridFunction g;
  std::size_t iterations = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::vector<IterationRecord> log;
  std::vector<std::string> warnings;
};

class FitError : public SolverFailure {
 public:
  FitError(const std::string& what, GridFunction last, double grad_norm)
      : SolverFailure(what), last_(std::move(last)), grad_norm_(grad_norm) {}
  const GridFunction& last_iterate() const { return last_; }
  double grad_norm() const { return grad_norm_; }

 private:
  GridFunction last_;
  double grad_norm_;
};

// Damped Newton on the tridiagonal Hessian with Armijo backtracking and a
// gradient-descent fallback. Stops when the gradient sup-norm reaches
// grad_tol, or when no step can decrease the objective and the gradient is at
// the rounding floor of the Hessian scale (reported as a warning).
FitResult fit(const Dataset& data, const Regularizer& reg, const FitConfig& config);

// int_lo^hi (g - f*)^2 dt, five-point Gauss-Legendre on every piece of the
// union of grid cells and spec breakpoints, each split `refine` times.
double empirical_mse(const GridFunction& g, const ProblemSpec& spec, double lo = 0.0, double hi = 1.0,
                     int refine = 1);

}  // namespace hetreg
