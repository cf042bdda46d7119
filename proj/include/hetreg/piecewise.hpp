#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hetreg {

// Closed-form building blocks for piecewise functions. Every kind carries
// its own first and second derivative.
//
//   const   params = [c]                       c
//   linear  params = [a, b]                    a + b x
//   poly    params = [c0, c1, ..., cd]         sum_k c_k x^k
//   sin     params = [offset, amp, freq, shift]  offset + amp sin(freq (x - shift))
//   cos     params = [offset, amp, freq, shift]  offset + amp cos(freq (x - shift))
enum class SegmentKind { Constant, Linear, Polynomial, Sine, Cosine };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view name);

struct Segment {
  double lo = 0.0;
  double hi = 1.0;
  SegmentKind kind = SegmentKind::Constant;
  std::vector<double> params;

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
};

// Function on [0, 1] made of contiguous segments. Segment i covers
// [lo_i, hi_i); the last one also owns x = 1.
class PiecewiseFunction {
 public:
  PiecewiseFunction() = default;
  explicit PiecewiseFunction(std::vector<Segment> segments);

  static PiecewiseFunction constant(double c);

  double operator()(double x) const { return locate(x).value(x); }
  double d1(double x) const { return locate(x).d1(x); }
  double d2(double x) const { return locate(x).d2(x); }

  const std::vector<Segment>& segments() const { return segments_; }
  // Interior segment boundaries.
  std::vector<double> breakpoints() const;
  bool empty() const { return segments_.empty(); }

  // Largest mismatch between the supplied derivatives and Richardson-extrapolated
  // central differences, measured as |d - fd| / max(1, |d|) at interior points
  // of every segment.
  double derivative_mismatch() const;

 private:
  const Segment& locate(double x) const;

  std::vector<Segment> segments_;
};

}  // namespace hetreg
