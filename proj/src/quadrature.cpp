#include "hetreg/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace hetreg::quadrature {
namespace {

struct Panel {
  double a, m, b;
  double fa, fm, fb;
  double whole;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double refine(const Integrand& f, const Panel& p, double tol, int depth) {
  const double lm = 0.5 * (p.a + p.m);
  const double rm = 0.5 * (p.m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, p.m, p.fa, flm, p.fm);
  const double right = simpson(p.m, p.b, p.fm, frm, p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return refine(f, {p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         refine(f, {p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const Integrand& f, double a, double b, const Options& opts) {
  if (b == a) return 0.0;
  // A coarse composite estimate sets the scale for the relative tolerance and
  // keeps the first bisection from missing narrow features.
  constexpr int kSeed = 8;
  const double h = (b - a) / kSeed;
  std::array<Panel, kSeed> panels{};
  double rough = 0.0;
  double fa = f(a);
  for (int i = 0; i < kSeed; ++i) {
    const double pa = a + i * h;
    const double pb = (i == kSeed - 1) ? b : a + (i + 1) * h;
    const double pm = 0.5 * (pa + pb);
    const double fm = f(pm);
    const double fb = f(pb);
    panels[i] = {pa, pm, pb, fa, fm, fb, simpson(pa, pb, fa, fm, fb)};
    rough += std::abs(panels[i].whole);
    fa = fb;
  }
  const double tol = std::max(opts.abs_tol, opts.rel_tol * rough) / kSeed;
  double total = 0.0;
  for (const auto& p : panels) total += refine(f, p, tol, opts.max_depth);
  return total;
}

double integrate_pieces(const Integrand& f, double a, double b, std::span<const double> breakpoints,
                        const Options& opts) {
  std::vector<double> cuts{a};
  for (double t : breakpoints) {
    if (t > a && t < b) cuts.push_back(t);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += adaptive_simpson(f, cuts[i], cuts[i + 1], opts);
  }
  return total;
}

double composite_simpson(const Integrand& f, double a, double b, int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  }
  return sum * h / 3.0;
}

double gauss_legendre5(const Integrand& f, double a, double b) {
  static constexpr std::array<double, 5> kNodes = {
      0.0, -0.5384693101056830910363144, 0.5384693101056830910363144,
      -0.9061798459386639927976269, 0.9061798459386639927976269};
  static constexpr std::array<double, 5> kWeights = {
      0.5688888888888888888888889, 0.4786286704993664680412915, 0.4786286704993664680412915,
      0.2369268850561890875142640, 0.2369268850561890875142640};
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < kNodes.size(); ++i) {
    sum += kWeights[i] * f(mid + half * kNodes[i]);
  }
  return sum * half;
}

}  // namespace hetreg::quadrature
