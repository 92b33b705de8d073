#include "singhom/zigzag.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace singhom {

namespace {

mpz_class floor_div(const Rational& y, const Rational& w) {
  Rational t = y / w;
  mpz_class out;
  mpz_fdiv_q(out.get_mpz_t(), t.get_num_mpz_t(), t.get_den_mpz_t());
  return out;
}

// Guard against stages whose breakpoint count would not fit in memory.
constexpr double kMaxBreakpoints = 2.5e7;

}  // namespace

SSequence::SSequence(std::string name, Log2Fn log2_s)
    : name_(std::move(name)), log2_s_(std::move(log2_s)) {}

SSequence SSequence::parse(const std::string& family) {
  if (family == "dexp") {
    return SSequence(family, [](unsigned n) -> Rational { return -pow2(static_cast<long>(n) + 1); });
  }
  if (family.rfind("pow2:", 0) == 0) {
    std::string rest = family.substr(5);
    std::string k_text = rest, c_text = "0";
    if (auto colon = rest.find(':'); colon != std::string::npos) {
      k_text = rest.substr(0, colon);
      c_text = rest.substr(colon + 1);
    }
    const Rational k = parse_rational(k_text);
    const Rational c = parse_rational(c_text);
    if (sgn(k) <= 0)
      throw InvariantViolation("s-sequence '" + family + "' is not strictly decreasing");
    return SSequence(family, [k, c](unsigned n) { return Rational(c - k * n); });
  }
  throw ParseError("unknown s-sequence family '" + family + "' (expected pow2:k[:c] or dexp)");
}

double SSequence::value(unsigned n) const { return std::exp2(to_double(log2(n))); }

bool SSequence::is_rational(unsigned n) const { return log2(n).get_den() == 1; }

Rational SSequence::exact(unsigned n) const {
  const Rational e = log2(n);
  if (e.get_den() != 1)
    throw PreconditionError("s_" + std::to_string(n) + " = 2^(" + to_string(e) + ") is irrational");
  return pow2(e.get_num().get_si());
}

std::vector<unsigned> choose_a(const SSequence& s, unsigned count) {
  std::vector<unsigned> a;
  unsigned n = 0;
  for (unsigned m = 0; m < count; ++m) {
    const Rational target = -pow2(static_cast<long>(m) + 1);
    if (m > 0) n = a.back() + 1;
    for (;;) {
      if (n > 0) {
        const Rational cur = s.log2(n);
        const Rational before = s.log2(n - 1);
        if (!(cur < before))
          throw InvariantViolation("s-sequence '" + s.name() + "' is not strictly decreasing at n = " +
                                   std::to_string(n));
      }
      if (s.log2(n) <= target) break;
      if (n > 1000000) throw PreconditionError("s-sequence decays too slowly to choose a_m");
      ++n;
    }
    a.push_back(n);
  }
  return a;
}

std::vector<ZigzagPiece> cell_runs(const PLFunc& f, unsigned level) {
  const Rational w = pow2(-static_cast<long>(level));
  const mpz_class top = mpz_class(1) << level;  // number of cells in [0,1]
  auto clamp_cell = [&](mpz_class c) {
    if (c < 0) c = 0;
    if (c >= top) c = top - 1;
    return c;
  };
  std::vector<ZigzagPiece> runs;
  mpz_class cur_cell = -1;
  auto extend = [&](const Rational& x0, const Rational& x1, const mpz_class& cell) {
    if (!runs.empty() && cell == cur_cell) {
      runs.back().domain.hi = x1;
      return;
    }
    runs.push_back({Interval{x0, x1}, Rational(cell) * w, Rational(0), Rational(0)});
    cur_cell = cell;
  };
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const Rational &x0 = xs[i], &x1 = xs[i + 1], &y0 = ys[i], &y1 = ys[i + 1];
    if (y0 == y1) {
      mpz_class c = floor_div(y0, w);
      if (Rational(c) * w == y0 && c > 0) c -= 1;
      extend(x0, x1, clamp_cell(c));
      continue;
    }
    // Split the segment where it crosses grid lines strictly inside.
    const bool up = y1 > y0;
    std::vector<Rational> cuts;
    if (up) {
      for (mpz_class k = floor_div(y0, w) + 1; Rational(k) * w < y1; ++k) cuts.push_back(Rational(k) * w);
    } else {
      mpz_class k = floor_div(y0, w);
      if (Rational(k) * w == y0) k -= 1;
      for (; Rational(k) * w > y1; --k) cuts.push_back(Rational(k) * w);
    }
    Rational xa = x0, ya = y0;
    auto emit = [&](const Rational& xb, const Rational& yb) {
      const Rational mid = (ya + yb) / 2;
      extend(xa, xb, clamp_cell(floor_div(mid, w)));
      xa = xb;
      ya = yb;
    };
    for (const auto& yc : cuts) emit(x0 + (yc - y0) * (x1 - x0) / (y1 - y0), yc);
    emit(x1, y1);
  }
  return runs;
}

PLFunc build_stage(const PLFunc& prev, unsigned m, unsigned a_m, std::vector<ZigzagPiece>* pieces) {
  if (m == 0) throw PreconditionError("stage 0 is the zero function");
  if (m > 6) throw PreconditionError("zig-zag stages above 6 are out of reach");
  const unsigned cell_level = 1u << (m - 1);  // J'_i has width 2^{-2^{m-1}}
  const Rational W = pow2(-static_cast<long>(cell_level));
  const unsigned long K = 1ul << cell_level;  // children of width 2^{-2^m}
  const Rational w = W / K;
  const Rational grid = pow2(-static_cast<long>(a_m));

  const auto runs = cell_runs(prev, cell_level);
  const double estimate = (std::ldexp(1.0, static_cast<int>(a_m)) + static_cast<double>(runs.size())) *
                          static_cast<double>(K + 3);
  if (estimate > kMaxBreakpoints)
    throw PreconditionError("zig-zag stage " + std::to_string(m) + " would need about " +
                            std::to_string(static_cast<long long>(estimate)) + " breakpoints");

  std::vector<Rational> xs{Rational(0)}, ys{prev.eval(Rational(0))};
  std::vector<Rational> occ_left(K), occ_right(K);
  for (const auto& run : runs) {
    const Rational& lo = run.cell_lo;
    const Rational hi = lo + W;
    mpz_class idx = floor_div(run.domain.lo, grid);
    Rational c = run.domain.lo;
    while (c < run.domain.hi) {
      const Rational d = std::min(Rational((idx + 1) * grid), run.domain.hi);
      ++idx;
      if (!(c < d)) {
        c = d;
        continue;
      }
      const Rational lambda = d - c;
      const Rational tau = lambda / K;
      const Rational yc = prev.eval(c);
      const Rational yd = prev.eval(d);
      if (pieces) pieces->push_back({Interval{c, d}, lo, yc, yd});
      // Approach leg from yc down to lo, return leg from hi down to yd.
      const Rational T1 = yc > lo ? tau / 4 : Rational(0);
      const Rational T3 = yd < hi ? tau / 4 : Rational(0);
      for (unsigned long j = 0; j < K; ++j) {
        const Rational clo = lo + w * j, chi = clo + w;
        occ_left[j] = 0;
        occ_right[j] = 0;
        if (sgn(T1) > 0) {
          const Rational ov = std::max(Rational(0), Rational(std::min(chi, yc) - clo));
          occ_left[j] = T1 * ov / (yc - lo);
        }
        if (sgn(T3) > 0) {
          const Rational ov = std::max(Rational(0), Rational(chi - std::max(clo, yd)));
          occ_right[j] = T3 * ov / (hi - yd);
        }
      }
      Rational t = c;
      if (sgn(T1) > 0) {
        t += T1;
        xs.push_back(t);
        ys.push_back(lo);
      }
      for (unsigned long j = 0; j < K; ++j) {
        t += tau - occ_left[j] - occ_right[j];
        if (j + 1 == K && sgn(T3) == 0) break;  // lands on (d, hi) below
        xs.push_back(t);
        ys.push_back(lo + w * (j + 1));
      }
      if ((sgn(T3) > 0 ? Rational(t + T3) : t) != d)
        throw InvariantViolation("zig-zag piece time budget does not close");
      xs.push_back(d);
      ys.push_back(yd);
      c = d;
    }
  }
  return PLFunc(std::move(xs), std::move(ys));
}

Zigzag::Zigzag(SSequence s, unsigned stages) : s_(std::move(s)) {
  a_ = choose_a(s_, stages + 1);
  phi_.push_back(PLFunc::constant(Rational(0)));
  pieces_.emplace_back();
  for (unsigned m = 1; m <= stages; ++m) {
    std::vector<ZigzagPiece> pcs;
    phi_.push_back(build_stage(phi_.back(), m, a(m), &pcs));
    pieces_.push_back(std::move(pcs));
  }
}

Pushforward Zigzag::top_pushforward(const Interval& I) const {
  const unsigned M = stages();
  if (M == 0) return pushforward(phi_[0], I);
  const unsigned cell_level = 1u << (M - 1);
  const Rational W = pow2(-static_cast<long>(cell_level));
  const unsigned long K = 1ul << cell_level;
  const Rational w = W / K;
  const auto& pcs = pieces_.back();
  auto first = std::lower_bound(pcs.begin(), pcs.end(), I.lo,
                                [](const ZigzagPiece& p, const Rational& x) { return p.domain.lo < x; });
  Pushforward out;
  for (auto it = first; it != pcs.end() && it->domain.lo < I.hi; ++it) {
    const ZigzagPiece& p = *it;
    if (p.domain.hi > I.hi)
      throw PreconditionError("top_pushforward: interval splits a zig-zag piece");
    const Rational tau = p.domain.length() / K;
    const Rational lo = p.cell_lo, hi = lo + W;
    // Every child cell is occupied exactly tau, uniformly except in the
    // (at most two) children where the approach and return legs end.
    out.segs.push_back({lo, hi, tau / w});
    if (p.y_left > lo) {
      const Rational A = tau / 4 / (p.y_left - lo);
      const Rational clo = lo + w * Rational(floor_div(p.y_left - lo, w));
      if (clo < p.y_left) {
        const Rational cut = A * (p.y_left - clo) / w;
        out.segs.push_back({clo, p.y_left, A - cut});
        out.segs.push_back({p.y_left, clo + w, -cut});
      }
    }
    if (p.y_right < hi) {
      const Rational B = tau / 4 / (hi - p.y_right);
      const Rational clo = lo + w * Rational(floor_div(p.y_right - lo, w));
      if (clo < p.y_right) {
        const Rational cut = B * (clo + w - p.y_right) / w;
        out.segs.push_back({clo, p.y_right, -cut});
        out.segs.push_back({p.y_right, clo + w, B - cut});
      }
    }
  }
  if (first != pcs.begin() && std::prev(first)->domain.hi > I.lo)
    throw PreconditionError("top_pushforward: interval splits a zig-zag piece");
  return out;
}

unsigned Zigzag::a(unsigned m) const {
  if (m >= a_.size()) a_ = choose_a(s_, m + 1);
  return a_[m];
}

int Zigzag::rung(unsigned n) const {
  if (n < a(0)) return -1;
  int m = 0;
  while (a(static_cast<unsigned>(m) + 1) <= n) ++m;
  return m;
}

Rational Zigzag::q(unsigned n) const {
  const int m = rung(n);
  if (m < 0) return Rational(1);
  // 18 * 2^{-2^m}, capped at 1 so that q stays nonincreasing.
  const Rational raw = 18 * pow2(-(1l << m));
  return std::min(raw, Rational(1));
}

namespace {

struct Seg {
  Rational x0, x1, y0, y1;
};

std::vector<Seg> clip(const PLFunc& f, const Interval& I) {
  std::vector<Seg> out;
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  for (std::size_t i = f.piece_index(I.lo); i + 1 < xs.size() && xs[i] < I.hi; ++i) {
    Seg s{xs[i], xs[i + 1], ys[i], ys[i + 1]};
    if (s.x0 < I.lo) {
      s.y0 = f.eval(I.lo);
      s.x0 = I.lo;
    }
    if (s.x1 > I.hi) {
      s.y1 = f.eval(I.hi);
      s.x1 = I.hi;
    }
    if (s.x0 < s.x1) out.push_back(std::move(s));
  }
  return out;
}

Rational occupancy(const std::vector<Seg>& segs, const Rational& t, const Rational& len) {
  Rational total = 0;
  const Rational u = t + len;
  for (const auto& s : segs) {
    if (s.y0 == s.y1) {
      if (t <= s.y0 && s.y0 <= u) total += s.x1 - s.x0;
      continue;
    }
    const Rational lo = std::min(s.y0, s.y1), hi = std::max(s.y0, s.y1);
    const Rational a = std::max(lo, t), b = std::min(hi, u);
    if (b > a) total += (b - a) * (s.x1 - s.x0) / (hi - lo);
  }
  return total;
}

}  // namespace

CoveringReport verify_covering_bound(const Zigzag& z, unsigned M, unsigned n) {
  CoveringReport rep;
  rep.n = n;
  rep.stage = M;
  rep.q = z.q(n);
  const int m = z.rung(n);
  if (m >= 0 && M < static_cast<unsigned>(m) + 1)
    throw PreconditionError("verify_covering_bound at n = " + std::to_string(n) +
                            " needs stage M >= " + std::to_string(m + 1));
  if (M > z.stages()) throw PreconditionError("stage " + std::to_string(M) + " not built");
  const PLFunc& phi = z.stage(M);
  const Rational s = z.s().exact(n);
  const Rational len = pow2(-static_cast<long>(n));
  std::ostringstream slack;
  if (m < 0) {
    slack << "n < a_0: q_n = 1 bounds any occupancy";
  } else {
    slack << "|phi_" << M << " - phi_" << m + 1 << "| <= 2^(1-2^" << m + 1
          << "), so J inflated to six 2^" << m + 1
          << "-dyadic cells covers the stage-" << M << " preimage; no extra slack";
  }
  rep.slack = slack.str();

  // Dyadic-aligned windows and windows shifted by half a length.
  const std::uint64_t count = std::uint64_t{1} << (n + 1);
  Rational best = 0;
  for (std::uint64_t k = 0; k + 1 < count; ++k) {
    const Rational lo = Rational(mpz_class(std::to_string(k), 10)) * len / 2;
    const Interval I{lo, lo + len};
    const auto segs = clip(phi, I);
    // The occupancy is piecewise linear in the position of J, so its maximum
    // sits where an end of J meets a breakpoint value.
    std::vector<Rational> cand;
    cand.reserve(4 * segs.size());
    for (const auto& sg : segs) {
      cand.push_back(sg.y0);
      cand.push_back(sg.y0 - s);
      cand.push_back(sg.y1);
      cand.push_back(sg.y1 - s);
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (const auto& t : cand) {
      const Rational r = occupancy(segs, t, s) / len;
      if (r > best) best = r;
    }
    ++rep.intervals_checked;
  }
  rep.max_ratio = best;
  rep.passed = best <= rep.q;
  return rep;
}

std::vector<OscillationRow> oscillation_certificate(const Zigzag& z, unsigned M, unsigned n_lo,
                                                    unsigned n_hi) {
  if (M > z.stages()) throw PreconditionError("stage " + std::to_string(M) + " not built");
  const PLFunc& phi = z.stage(M);
  std::vector<OscillationRow> rows;
  for (unsigned n = n_lo; n <= n_hi; ++n) {
    OscillationRow row;
    row.n = n;
    const Rational len = pow2(-static_cast<long>(n));
    bool first = true;
    const std::uint64_t count = std::uint64_t{1} << n;
    for (std::uint64_t k = 0; k < count; ++k) {
      const Rational lo = Rational(mpz_class(std::to_string(k), 10)) * len;
      const Rational osc = oscillation(phi, Interval{lo, lo + len});
      if (first || osc < row.min_oscillation) row.min_oscillation = osc;
      first = false;
    }
    row.s_n = z.s().value(n);
    row.certified = to_double(row.min_oscillation) >= row.s_n &&
                    (!z.s().is_rational(n) || row.min_oscillation >= z.s().exact(n));
    const double q = to_double(z.q(n));
    row.counting_bound = row.s_n * (1.0 / q - 1.0);
    row.counting_ok = to_double(row.min_oscillation) >= row.counting_bound;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace singhom
