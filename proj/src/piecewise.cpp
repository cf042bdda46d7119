#include "hetreg/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "hetreg/error.hpp"

namespace hetreg {
namespace {

std::size_t required_params(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Constant: return 1;
    case SegmentKind::Linear: return 2;
    case SegmentKind::Polynomial: return 1;  // at least
    case SegmentKind::Sine:
    case SegmentKind::Cosine: return 4;
  }
  return 0;
}

double poly_eval(const std::vector<double>& c, double x, int order) {
  // Horner on the order-th derivative coefficients.
  double acc = 0.0;
  for (int k = static_cast<int>(c.size()) - 1; k >= order; --k) {
    double coef = c[k];
    for (int j = 0; j < order; ++j) coef *= static_cast<double>(k - j);
    acc = acc * x + coef;
  }
  return acc;
}

}  // namespace

std::string_view to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Constant: return "const";
    case SegmentKind::Linear: return "linear";
    case SegmentKind::Polynomial: return "poly";
    case SegmentKind::Sine: return "sin";
    case SegmentKind::Cosine: return "cos";
  }
  return "?";
}

SegmentKind segment_kind_from_string(std::string_view name) {
  for (auto kind : {SegmentKind::Constant, SegmentKind::Linear, SegmentKind::Polynomial,
                    SegmentKind::Sine, SegmentKind::Cosine}) {
    if (to_string(kind) == name) return kind;
  }
  throw ContractViolation(fmt::format("unknown segment kind '{}'", name));
}

double Segment::value(double x) const {
  const auto& p = params;
  switch (kind) {
    case SegmentKind::Constant: return p[0];
    case SegmentKind::Linear: return p[0] + p[1] * x;
    case SegmentKind::Polynomial: return poly_eval(p, x, 0);
    case SegmentKind::Sine: return p[0] + p[1] * std::sin(p[2] * (x - p[3]));
    case SegmentKind::Cosine: return p[0] + p[1] * std::cos(p[2] * (x - p[3]));
  }
  return 0.0;
}

double Segment::d1(double x) const {
  const auto& p = params;
  switch (kind) {
    case SegmentKind::Constant: return 0.0;
    case SegmentKind::Linear: return p[1];
    case SegmentKind::Polynomial: return poly_eval(p, x, 1);
    case SegmentKind::Sine: return p[1] * p[2] * std::cos(p[2] * (x - p[3]));
    case SegmentKind::Cosine: return -p[1] * p[2] * std::sin(p[2] * (x - p[3]));
  }
  return 0.0;
}

double Segment::d2(double x) const {
  const auto& p = params;
  switch (kind) {
    case SegmentKind::Constant:
    case SegmentKind::Linear: return 0.0;
    case SegmentKind::Polynomial: return poly_eval(p, x, 2);
    case SegmentKind::Sine: return -p[1] * p[2] * p[2] * std::sin(p[2] * (x - p[3]));
    case SegmentKind::Cosine: return -p[1] * p[2] * p[2] * std::cos(p[2] * (x - p[3]));
  }
  return 0.0;
}

PiecewiseFunction::PiecewiseFunction(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw ContractViolation("piecewise function needs at least one segment");
  if (segments_.front().lo != 0.0 || segments_.back().hi != 1.0) {
    throw ContractViolation("piecewise function must cover [0, 1]");
  }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (!(s.lo < s.hi)) {
      throw ContractViolation(fmt::format("segment {} has lo >= hi", i));
    }
    if (i > 0 && segments_[i - 1].hi != s.lo) {
      throw ContractViolation(fmt::format("segments {} and {} are not contiguous", i - 1, i));
    }
    const auto need = required_params(s.kind);
    const bool ok = s.kind == SegmentKind::Polynomial ? s.params.size() >= need : s.params.size() == need;
    if (!ok) {
      throw ContractViolation(fmt::format("segment {} ({}) has {} params", i, to_string(s.kind),
                                          s.params.size()));
    }
    for (double v : s.params) {
      if (!std::isfinite(v)) throw ContractViolation(fmt::format("segment {} has a non-finite param", i));
    }
  }
}

PiecewiseFunction PiecewiseFunction::constant(double c) {
  return PiecewiseFunction({Segment{0.0, 1.0, SegmentKind::Constant, {c}}});
}

const Segment& PiecewiseFunction::locate(double x) const {
  if (segments_.empty()) throw ContractViolation("evaluating an empty piecewise function");
  auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                             [](double v, const Segment& s) { return v < s.hi; });
  if (it == segments_.end()) return segments_.back();
  return *it;
}

std::vector<double> PiecewiseFunction::breakpoints() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < segments_.size(); ++i) out.push_back(segments_[i].lo);
  return out;
}

double PiecewiseFunction::derivative_mismatch() const {
  double worst = 0.0;
  constexpr int kProbes = 7;
  for (const auto& s : segments_) {
    const double width = s.hi - s.lo;
    const double h = std::min(2e-4, width / 16.0);
    for (int k = 1; k <= kProbes; ++k) {
      const double x = s.lo + width * k / (kProbes + 1);
      // f' is checked against differences of f, and f'' against differences
      // of the (already checked) f'; both use one Richardson step.
      auto diff = [&](auto&& g, double step) { return (g(x + step) - g(x - step)) / (2.0 * step); };
      auto value = [&](double t) { return s.value(t); };
      auto slope = [&](double t) { return s.d1(t); };
      const double fd1 = (4.0 * diff(value, 0.5 * h) - diff(value, h)) / 3.0;
      const double fd2 = (4.0 * diff(slope, 0.5 * h) - diff(slope, h)) / 3.0;
      const double d1v = s.d1(x);
      const double d2v = s.d2(x);
      worst = std::max(worst, std::abs(d1v - fd1) / std::max(1.0, std::abs(d1v)));
      worst = std::max(worst, std::abs(d2v - fd2) / std::max(1.0, std::abs(d2v)));
    }
  }
  return worst;
}

}  // namespace hetreg
