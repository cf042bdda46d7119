#include "hetreg/theory.hpp"

#include <cmath>

#include "hetreg/error.hpp"
#include "hetreg/quadrature.hpp"

namespace hetreg {

double l0_constant() { return 0.25; }

double l0_quadrature(double half_width, double rel_tol) {
  const double bp[] = {0.0};
  quadrature::Options opts;
  opts.rel_tol = rel_tol;
  return quadrature::integrate_pieces([](double t) { return 0.25 * std::exp(-2.0 * std::abs(t)); },
                                      -half_width, half_width, bp, opts);
}

double l0_composite(int panels, double half_width) {
  auto k = [](double t) { return 0.25 * std::exp(-2.0 * std::abs(t)); };
  // kink at 0
  return quadrature::composite_simpson(k, -half_width, 0.0, panels) +
         quadrature::composite_simpson(k, 0.0, half_width, panels);
}

double l0_tail_bound(double half_width) { return 0.25 * std::exp(-2.0 * half_width); }

AsymptoticReport asymptotic_mse(const ProblemSpec& spec, const RegProfile& profile, double lambda) {
  if (!(lambda > 0.0)) throw ContractViolation("lambda must be positive");
  AsymptoticReport rep;
  rep.lambda = lambda;
  const auto coeffs = group_coefficients(spec, profile.partition);
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    GroupTerm g;
    g.lo = profile.partition.lo(j);
    g.hi = profile.partition.hi(j);
    g.A = coeffs[j].A;
    g.B = coeffs[j].B;
    g.rho = profile.rho[j];
    g.bias = lambda * lambda * g.rho * g.rho * g.A;
    g.variance = g.B / std::sqrt(g.rho);
    rep.bias_term += g.bias;
    rep.variance_term += g.variance;
    rep.groups.push_back(g);
  }
  rep.total = rep.bias_term + rep.variance_term;
  return rep;
}

AsymptoticReport asymptotic_mse(const ProblemSpec&, const PointwiseProfile&, double) {
  throw UnsupportedProfile("asymptotic_mse needs a piecewise-constant profile on a group partition");
}

double ridge_lambda_opt(std::size_t d, double sigma2, std::size_t n, double theta_norm2) {
  if (n < 1) throw ContractViolation("ridge_lambda_opt needs n >= 1");
  if (!(theta_norm2 > 0.0)) throw ContractViolation("ridge_lambda_opt needs |theta|^2 > 0");
  if (!(sigma2 >= 0.0)) throw ContractViolation("ridge_lambda_opt needs sigma^2 >= 0");
  return static_cast<double>(d) * sigma2 / (static_cast<double>(n) * theta_norm2);
}

double lambda_schedule(double c0, std::size_t n) {
  if (!(c0 > 0.0) || n < 1) throw ContractViolation("lambda_schedule needs C0 > 0 and n >= 1");
  return c0 / std::pow(static_cast<double>(n), 0.4);
}

}  // namespace hetreg
