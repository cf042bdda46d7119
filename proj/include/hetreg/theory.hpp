#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "hetreg/domain.hpp"
#include "hetreg/regprofile.hpp"

namespace hetreg {

// L0 = int_R (1/4) exp(-2|t|) dt = 1/4.
double l0_constant();
// Adaptive quadrature over [-half_width, half_width].
double l0_quadrature(double half_width = 40.0, double rel_tol = 1e-13);
// Composite Simpson with `panels` panels per half line.
double l0_composite(int panels, double half_width = 40.0);
// Mass outside [-half_width, half_width]: exp(-2 T) / 4.
double l0_tail_bound(double half_width);

struct GroupTerm {
  double lo = 0.0;
  double hi = 0.0;
  double A = 0.0;
  double B = 0.0;
  double rho = 0.0;
  double bias = 0.0;      // lambda^2 rho^2 A
  double variance = 0.0;  // rho^{-1/2} B
};

// Asymptotic MSE up to the unknown positive scale C_n.
struct AsymptoticReport {
  double bias_term = 0.0;
  double variance_term = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  std::vector<GroupTerm> groups;
};

// Sum over groups of lambda^2 rho_j^2 A_j + rho_j^{-1/2} B_j.
AsymptoticReport asymptotic_mse(const ProblemSpec& spec, const RegProfile& profile, double lambda);

// A regularization density given pointwise. The functional is only defined for
// piecewise-constant profiles; passing one of these throws UnsupportedProfile.
struct PointwiseProfile {
  std::function<double(double)> rho;
};
AsymptoticReport asymptotic_mse(const ProblemSpec& spec, const PointwiseProfile& profile, double lambda);

// d sigma^2 / (n |theta|^2).
double ridge_lambda_opt(std::size_t d, double sigma2, std::size_t n, double theta_norm2);

// lambda = C0 n^{-2/5}.
double lambda_schedule(double c0, std::size_t n);

}  // namespace hetreg
