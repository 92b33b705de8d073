#include "singhom/interval_fn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace singhom {

DyadicInterval::DyadicInterval(unsigned lvl, std::uint64_t idx) : level(lvl), index(idx) {
  if (lvl < 64 && idx >= (std::uint64_t{1} << lvl))
    throw InvariantViolation("dyadic index " + std::to_string(idx) + " out of range at level " +
                             std::to_string(lvl));
}

Rational DyadicInterval::lo() const {
  return Rational(mpz_class(std::to_string(index), 10)) * length();
}

Rational DyadicInterval::hi() const {
  return Rational(mpz_class(std::to_string(index), 10) + 1) * length();
}

PLFunc::PLFunc(std::vector<Rational> xs, std::vector<Rational> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() != ys_.size()) throw InvariantViolation("breakpoint x/y size mismatch");
  if (xs_.size() < 2) throw InvariantViolation("a PLFunc needs at least two breakpoints");
  if (xs_.front() != 0 || xs_.back() != 1)
    throw InvariantViolation("breakpoints must start at x = 0 and end at x = 1");
  monotone_ = ys_.front() == 0 && ys_.back() == 1;
  for (std::size_t i = 1; i < xs_.size(); ++i) {
    if (!(xs_[i - 1] < xs_[i]))
      throw InvariantViolation("breakpoint x-coordinates must be strictly increasing (index " +
                               std::to_string(i) + ")");
    if (!(ys_[i - 1] < ys_[i])) monotone_ = false;
  }
  xd_.reserve(xs_.size());
  yd_.reserve(ys_.size());
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    xd_.push_back(to_double(xs_[i]));
    yd_.push_back(to_double(ys_[i]));
  }
}

PLFunc PLFunc::identity() { return PLFunc({Rational(0), Rational(1)}, {Rational(0), Rational(1)}); }

PLFunc PLFunc::constant(const Rational& c) { return PLFunc({Rational(0), Rational(1)}, {c, c}); }

std::size_t PLFunc::piece_index(const Rational& x) const {
  if (x < 0 || x > 1) throw DomainError("x = " + to_string(x) + " outside [0,1]");
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs_.begin());
  if (i == 0) return 0;
  return std::min(i - 1, xs_.size() - 2);
}

std::size_t PLFunc::piece_index(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("x = " + std::to_string(x) + " outside [0,1]");
  auto it = std::upper_bound(xd_.begin(), xd_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xd_.begin());
  if (i == 0) return 0;
  return std::min(i - 1, xd_.size() - 2);
}

Rational PLFunc::eval(const Rational& x) const {
  const std::size_t i = piece_index(x);
  if (x == xs_[i]) return ys_[i];
  if (x == xs_[i + 1]) return ys_[i + 1];
  return ys_[i] + (x - xs_[i]) * (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
}

double PLFunc::eval(double x) const {
  const std::size_t i = piece_index(x);
  if (x == xd_[i]) return yd_[i];
  if (x == xd_[i + 1]) return yd_[i + 1];
  const double t = (x - xd_[i]) / (xd_[i + 1] - xd_[i]);
  return yd_[i] + t * (yd_[i + 1] - yd_[i]);
}

void PLFunc::require_monotone(const char* what) const {
  if (!monotone_)
    throw InvariantViolation(std::string(what) + " requires a monotone homeomorphism");
}

Rational PLFunc::inverse_eval(const Rational& y) const {
  require_monotone("inverse_eval");
  if (y < 0 || y > 1) throw DomainError("y = " + to_string(y) + " outside [0,1]");
  auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
  std::size_t i = static_cast<std::size_t>(it - ys_.begin());
  i = i == 0 ? 0 : std::min(i - 1, ys_.size() - 2);
  if (y == ys_[i]) return xs_[i];
  if (y == ys_[i + 1]) return xs_[i + 1];
  return xs_[i] + (y - ys_[i]) * (xs_[i + 1] - xs_[i]) / (ys_[i + 1] - ys_[i]);
}

double PLFunc::inverse_eval(double y) const {
  require_monotone("inverse_eval");
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("y = " + std::to_string(y) + " outside [0,1]");
  auto it = std::upper_bound(yd_.begin(), yd_.end(), y);
  std::size_t i = static_cast<std::size_t>(it - yd_.begin());
  i = i == 0 ? 0 : std::min(i - 1, yd_.size() - 2);
  if (y == yd_[i]) return xd_[i];
  if (y == yd_[i + 1]) return xd_[i + 1];
  const double t = (y - yd_[i]) / (yd_[i + 1] - yd_[i]);
  return xd_[i] + t * (xd_[i + 1] - xd_[i]);
}

Rational PLFunc::min_value() const { return *std::min_element(ys_.begin(), ys_.end()); }
Rational PLFunc::max_value() const { return *std::max_element(ys_.begin(), ys_.end()); }

Rational PLFunc::sup_abs() const {
  Rational lo = min_value(), hi = max_value();
  return std::max(Rational(abs(lo)), Rational(abs(hi)));
}

PLFunc PLFunc::scaled(const Rational& c) const {
  std::vector<Rational> ys(ys_);
  for (auto& y : ys) y *= c;
  return PLFunc(xs_, std::move(ys));
}

PLFunc inverse(const PLFunc& f) {
  if (!f.monotone_homeo()) throw InvariantViolation("inverse requires a monotone homeomorphism");
  return PLFunc(f.ys(), f.xs());
}

PLFunc compose(const PLFunc& outer, const PLFunc& inner) {
  if (inner.min_value() < 0 || inner.max_value() > 1)
    throw DomainError("compose: inner function leaves [0,1]");
  const auto& ix = inner.xs();
  const auto& iy = inner.ys();
  std::vector<Rational> xs;
  xs.reserve(ix.size() + outer.size());

  if (inner.monotone_homeo()) {
    // Merge inner breakpoints with inner-preimages of outer breakpoints in one sweep.
    const auto& ox = outer.xs();
    std::size_t j = 1;
    for (std::size_t i = 0; i + 1 < ix.size(); ++i) {
      xs.push_back(ix[i]);
      while (j + 1 < ox.size() && ox[j] <= iy[i]) ++j;
      while (j + 1 < ox.size() && ox[j] < iy[i + 1]) {
        xs.push_back(ix[i] + (ox[j] - iy[i]) * (ix[i + 1] - ix[i]) / (iy[i + 1] - iy[i]));
        ++j;
      }
    }
    xs.push_back(ix.back());
  } else {
    // General inner: split each piece where it crosses an outer breakpoint.
    const auto& ox = outer.xs();
    for (std::size_t i = 0; i + 1 < ix.size(); ++i) {
      xs.push_back(ix[i]);
      const Rational& a = iy[i];
      const Rational& b = iy[i + 1];
      if (a == b) continue;
      const Rational lo = std::min(a, b), hi = std::max(a, b);
      auto first = std::upper_bound(ox.begin(), ox.end(), lo);
      auto last = std::lower_bound(ox.begin(), ox.end(), hi);
      std::vector<Rational> cut;
      for (auto it = first; it < last; ++it)
        cut.push_back(ix[i] + (*it - a) * (ix[i + 1] - ix[i]) / (b - a));
      if (a > b) std::reverse(cut.begin(), cut.end());
      xs.insert(xs.end(), cut.begin(), cut.end());
    }
    xs.push_back(ix.back());
  }

  std::vector<Rational> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) ys.push_back(outer.eval(inner.eval(x)));
  return PLFunc(std::move(xs), std::move(ys));
}

Rational oscillation(const PLFunc& f, const Interval& I) {
  if (I.lo > I.hi) throw DomainError("oscillation over an empty interval");
  if (I.lo < 0 || I.hi > 1) throw DomainError("oscillation interval leaves [0,1]");
  Rational lo = f.eval(I.lo), hi = lo;
  const Rational end = f.eval(I.hi);
  lo = std::min(lo, end);
  hi = std::max(hi, end);
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  auto it = std::upper_bound(xs.begin(), xs.end(), I.lo);
  for (std::size_t i = static_cast<std::size_t>(it - xs.begin()); i < xs.size() && xs[i] < I.hi;
       ++i) {
    if (ys[i] < lo) lo = ys[i];
    if (ys[i] > hi) hi = ys[i];
  }
  return hi - lo;
}

double polyline_length(const PLFunc& f) {
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  double total = 0.0;
  Rational dx, dy;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    dx = xs[i + 1] - xs[i];
    dy = ys[i + 1] - ys[i];
    total += std::sqrt(to_double(dx * dx + dy * dy));
  }
  return total;
}

Rational preimage_measure(const PLFunc& f, const Interval& J) {
  return preimage_measure(f, Interval{Rational(0), Rational(1)}, J);
}

Rational preimage_measure(const PLFunc& f, const Interval& I, const Interval& J) {
  if (I.lo < 0 || I.hi > 1 || I.lo > I.hi) throw DomainError("preimage_measure: bad interval I");
  Rational total = 0;
  if (J.lo > J.hi || I.lo == I.hi) return total;
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  std::size_t i = f.piece_index(I.lo);
  for (; i + 1 < xs.size() && xs[i] < I.hi; ++i) {
    Rational x0 = xs[i], x1 = xs[i + 1];
    Rational y0 = ys[i], y1 = ys[i + 1];
    if (x0 < I.lo) {
      y0 = f.eval(I.lo);
      x0 = I.lo;
    }
    if (x1 > I.hi) {
      y1 = f.eval(I.hi);
      x1 = I.hi;
    }
    if (x1 <= x0) continue;
    if (y0 == y1) {
      if (J.contains(y0)) total += x1 - x0;
      continue;
    }
    const Rational lo = std::min(y0, y1), hi = std::max(y0, y1);
    const Rational a = std::max(lo, J.lo), b = std::min(hi, J.hi);
    if (b > a) total += (b - a) * (x1 - x0) / (hi - lo);
  }
  return total;
}

Rational Pushforward::mass(const Rational& a, const Rational& b) const {
  Rational total = 0;
  for (const auto& s : segs) {
    const Rational lo = std::max(a, s.y0), hi = std::min(b, s.y1);
    if (hi > lo) total += (hi - lo) * s.density;
  }
  for (const auto& p : atoms)
    if (a <= p.y && p.y <= b) total += p.mass;
  return total;
}

Pushforward Pushforward::scaled(const Rational& c) const {
  if (sgn(c) <= 0) throw DomainError("pushforward scale must be positive");
  Pushforward out;
  out.segs.reserve(segs.size());
  for (const auto& s : segs) out.segs.push_back({s.y0 * c, s.y1 * c, s.density / c});
  for (const auto& p : atoms) out.atoms.push_back({p.y * c, p.mass});
  return out;
}

Pushforward pushforward(const PLFunc& f, const Interval& I) {
  Pushforward out;
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  for (std::size_t i = f.piece_index(I.lo); i + 1 < xs.size() && xs[i] < I.hi; ++i) {
    Rational x0 = xs[i], x1 = xs[i + 1], y0 = ys[i], y1 = ys[i + 1];
    if (x0 < I.lo) {
      y0 = f.eval(I.lo);
      x0 = I.lo;
    }
    if (x1 > I.hi) {
      y1 = f.eval(I.hi);
      x1 = I.hi;
    }
    if (!(x0 < x1)) continue;
    if (y0 == y1) {
      out.atoms.push_back({y0, x1 - x0});
      continue;
    }
    if (y0 > y1) std::swap(y0, y1);
    out.segs.push_back({y0, y1, (x1 - x0) / (y1 - y0)});
  }
  return out;
}

Rational sup_distance(const PLFunc& a, const PLFunc& b) {
  std::vector<Rational> xs;
  xs.reserve(a.size() + b.size());
  std::merge(a.xs().begin(), a.xs().end(), b.xs().begin(), b.xs().end(), std::back_inserter(xs));
  Rational best = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0 && xs[i] == xs[i - 1]) continue;
    Rational d = abs(a.eval(xs[i]) - b.eval(xs[i]));
    if (d > best) best = d;
  }
  return best;
}

Rational partition_increment_sum(const PLFunc& f, const std::vector<Rational>& partition) {
  if (partition.size() < 2 || partition.front() != 0 || partition.back() != 1)
    throw DomainError("partition must run from 0 to 1");
  Rational total = 0;
  Rational prev = f.eval(partition.front());
  for (std::size_t i = 1; i < partition.size(); ++i) {
    if (!(partition[i - 1] < partition[i]))
      throw DomainError("partition must be strictly increasing");
    Rational cur = f.eval(partition[i]);
    total += partition[i] - partition[i - 1];
    total += abs(cur - prev);
    prev = cur;
  }
  return total;
}

}  // namespace singhom
