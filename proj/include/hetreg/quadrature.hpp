#pragma once

#include <functional>
#include <span>

namespace hetreg::quadrature {

using Integrand = std::function<double(double)>;

struct Options {
  double rel_tol = 1e-11;
  double abs_tol = 1e-14;
  int max_depth = 48;
};

// Adaptive Simpson on [a, b].
double adaptive_simpson(const Integrand& f, double a, double b, const Options& opts = {});

// Adaptive Simpson over [a, b], split at every breakpoint strictly inside it.
// Integrands only need to be smooth between breakpoints.
double integrate_pieces(const Integrand& f, double a, double b, std::span<const double> breakpoints,
                        const Options& opts = {});

// Composite Simpson with `panels` panels (rounded up to even).
double composite_simpson(const Integrand& f, double a, double b, int panels);

// Five-point Gauss-Legendre on [a, b], exact for polynomials of degree <= 9.
double gauss_legendre5(const Integrand& f, double a, double b);

}  // namespace hetreg::quadrature
