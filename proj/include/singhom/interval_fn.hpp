#pragma once

// Exact piecewise-linear functions on [0,1] and dyadic intervals.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "singhom/rational.hpp"

namespace singhom {

struct Interval {
  Rational lo;
  Rational hi;

  Rational length() const { return hi - lo; }
  bool contains(const Rational& x) const { return lo <= x && x <= hi; }
};

// [index/2^level, (index+1)/2^level]
struct DyadicInterval {
  unsigned level = 0;
  std::uint64_t index = 0;

  DyadicInterval() = default;
  DyadicInterval(unsigned level, std::uint64_t index);

  Rational lo() const;
  Rational hi() const;
  Rational length() const { return pow2(-static_cast<long>(level)); }
  Interval interval() const { return {lo(), hi()}; }
};

// Continuous piecewise-linear function given by breakpoints (x_i, y_i) with
// 0 = x_0 < x_1 < ... < x_last = 1. Immutable once built.
class PLFunc {
 public:
  // Validates strict increase of x, x_0 = 0 and x_last = 1.
  PLFunc(std::vector<Rational> xs, std::vector<Rational> ys);

  static PLFunc identity();
  static PLFunc constant(const Rational& c);

  const std::vector<Rational>& xs() const { return xs_; }
  const std::vector<Rational>& ys() const { return ys_; }
  const std::vector<double>& xs_double() const { return xd_; }
  const std::vector<double>& ys_double() const { return yd_; }
  std::size_t size() const { return xs_.size(); }
  std::size_t pieces() const { return xs_.size() - 1; }

  // y strictly increasing with y_0 = 0 and y_last = 1.
  bool monotone_homeo() const { return monotone_; }

  Rational eval(const Rational& x) const;
  double eval(double x) const;

  // Index i of the piece [x_i, x_{i+1}] containing x (the left one at a breakpoint).
  std::size_t piece_index(const Rational& x) const;
  std::size_t piece_index(double x) const;

  // Inverse evaluation of a monotone homeomorphism.
  Rational inverse_eval(const Rational& y) const;
  double inverse_eval(double y) const;

  Rational min_value() const;
  Rational max_value() const;
  Rational sup_abs() const;

  PLFunc scaled(const Rational& c) const;

  friend bool operator==(const PLFunc& a, const PLFunc& b) {
    return a.xs_ == b.xs_ && a.ys_ == b.ys_;
  }

 private:
  void require_monotone(const char* what) const;

  std::vector<Rational> xs_, ys_;
  std::vector<double> xd_, yd_;
  bool monotone_ = false;
};

PLFunc inverse(const PLFunc& f);
PLFunc compose(const PLFunc& outer, const PLFunc& inner);

Rational oscillation(const PLFunc& f, const Interval& I);

// Sum of Euclidean lengths of the graph's segments.
double polyline_length(const PLFunc& f);

// Lebesgue measure of {x in I : f(x) in J}; I defaults to [0,1].
Rational preimage_measure(const PLFunc& f, const Interval& J);
Rational preimage_measure(const PLFunc& f, const Interval& I, const Interval& J);

// Pushforward of Lebesgue measure on I under f, as uniform densities on
// value intervals plus point masses from constant pieces. Segments may overlap;
// the measure is their sum.
struct DensitySeg {
  Rational y0, y1, density;  // mass (y1 - y0) * density
};
struct PointMass {
  Rational y, mass;
};
struct Pushforward {
  std::vector<DensitySeg> segs;
  std::vector<PointMass> atoms;

  // Exact mass of [a, b].
  Rational mass(const Rational& a, const Rational& b) const;
  // Same measure with values multiplied by c > 0.
  Pushforward scaled(const Rational& c) const;
};
Pushforward pushforward(const PLFunc& f, const Interval& I);

// sup |a - b| over [0,1], exact.
Rational sup_distance(const PLFunc& a, const PLFunc& b);

// Sum of (dx + dy) over consecutive points of a partition 0 = p_0 < ... < p_k = 1.
Rational partition_increment_sum(const PLFunc& f, const std::vector<Rational>& partition);

}  // namespace singhom
