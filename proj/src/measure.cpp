#include "singhom/measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "overloaded.hpp"
#include "singhom/rng.hpp"

namespace singhom {

RBox RBox::unit(int d) {
  return RBox{std::vector<Rational>(d, Rational(0)), std::vector<Rational>(d, Rational(1))};
}

Rational RBox::volume() const {
  Rational v = 1;
  for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
  return v;
}

Box RBox::to_double() const {
  Box b{Point(dim()), Point(dim())};
  for (int i = 0; i < dim(); ++i) {
    b.lo[i] = singhom::to_double(lo[i]);
    b.hi[i] = singhom::to_double(hi[i]);
  }
  return b;
}

namespace {

mpz_class floor_q(const Rational& q) {
  mpz_class r;
  mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

mpz_class ceil_q(const Rational& q) {
  mpz_class r;
  mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return r;
}

// Grid indices j with [j, j+1] * 2^{-n} meeting [lo, hi] in positive length
// (or containing it, when lo == hi).
std::pair<long, long> grid_range(const Rational& lo, const Rational& hi, unsigned n) {
  const Rational scale = pow2(static_cast<long>(n));
  const long top = (1L << n) - 1;
  long a = floor_q(lo * scale).get_si();
  long b = ceil_q(hi * scale).get_si() - 1;
  if (b < a) b = a;
  return {std::clamp(a, 0L, top), std::clamp(b, 0L, top)};
}

Rational overlap(const Rational& a, const Rational& b, const Rational& c, const Rational& e) {
  const Rational lo = std::max(a, c), hi = std::min(b, e);
  return hi > lo ? Rational(hi - lo) : Rational(0);
}

// Integral over u in [u0, u1] of |[a, b] ∩ [u, u + w]|, exactly. The
// integrand is the trapezoid through (a - w, 0), (min(a, b - w), h),
// (max(a, b - w), h), (b, 0) with h = min(w, b - a).
Rational trapezoid_integral(const Rational& a, const Rational& b, const Rational& w,
                            const Rational& u0, const Rational& u1) {
  if (!(u1 > u0) || !(b > a) || sgn(w) <= 0) return 0;
  const Rational h = std::min(w, Rational(b - a));
  const Rational t[4] = {a - w, std::min(a, Rational(b - w)), std::max(a, Rational(b - w)), b};
  const Rational v[4] = {0, h, h, 0};
  Rational total = 0;
  for (int s = 0; s < 3; ++s) {
    const Rational lo = std::max(u0, t[s]), hi = std::min(u1, t[s + 1]);
    if (!(hi > lo)) continue;
    const Rational span = t[s + 1] - t[s];
    auto at = [&](const Rational& u) -> Rational { return v[s] + (v[s + 1] - v[s]) * (u - t[s]) / span; };
    total += (at(lo) + at(hi)) * (hi - lo) / 2;
  }
  return total;
}

Rational trapezoid_value(const Rational& a, const Rational& b, const Rational& w, const Rational& u) {
  return overlap(a, b, u, u + w);
}

// ---------------------------------------------------------------------------
// Affine cells.

struct Piece1D {
  Rational lo, hi, slope, icpt;
};

std::vector<Piece1D> pieces_on(const PLFunc& f, const Rational& lo, const Rational& hi) {
  std::vector<Piece1D> out;
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  for (std::size_t i = f.piece_index(lo); i + 1 < xs.size() && xs[i] < hi; ++i) {
    const Rational a = std::max(lo, xs[i]), b = std::min(hi, xs[i + 1]);
    if (!(b > a) && !(lo == hi)) continue;
    const Rational slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    out.push_back({a, b, slope, ys[i] - slope * xs[i]});
    if (lo == hi) break;
  }
  if (out.empty()) {
    const std::size_t i = f.piece_index(lo);
    const Rational slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    out.push_back({lo, hi, slope, ys[i] - slope * xs[i]});
  }
  return out;
}

AffineCell identity_cell(const RBox& Q) {
  const int d = Q.dim();
  AffineCell c{Q, std::vector<Rational>(d * d, Rational(0)), std::vector<Rational>(d, Rational(0))};
  for (int i = 0; i < d; ++i) c.A[i * d + i] = 1;
  return c;
}

std::vector<AffineCell> product_cells(const std::vector<std::vector<Piece1D>>& axes, const RBox& Q) {
  const int d = Q.dim();
  std::vector<AffineCell> out;
  std::vector<std::size_t> idx(d, 0);
  while (true) {
    AffineCell c = identity_cell(Q);
    for (int i = 0; i < d; ++i) {
      const Piece1D& p = axes[i][idx[i]];
      c.box.lo[i] = p.lo;
      c.box.hi[i] = p.hi;
      c.A[i * d + i] = p.slope;
      c.b[i] = p.icpt;
    }
    out.push_back(std::move(c));
    int i = 0;
    while (i < d && ++idx[i] == axes[i].size()) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

bool is_diagonal(const AffineCell& c, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && sgn(c.A[i * d + j]) != 0) return false;
  return true;
}

std::vector<AffineCell> cells_of(const HomeoExpr& e, const RBox& Q) {
  const int d = e.dim();
  return std::visit(
      overloaded{
          [&](const IdentityNode&) { return std::vector<AffineCell>{identity_cell(Q)}; },
          [&](const Product1DNode& n) {
            std::vector<std::vector<Piece1D>> axes;
            for (int i = 0; i < d; ++i) axes.push_back(pieces_on(*n.f[i], Q.lo[i], Q.hi[i]));
            return product_cells(axes, Q);
          },
          [&](const SlideNode& n) {
            std::vector<AffineCell> out;
            const Rational mid_lo = n.delta_lo, mid_hi = 1 - n.delta_hi;
            const Rational cuts[4] = {Rational(0), mid_lo, mid_hi, Rational(1)};
            for (const Piece1D& p : pieces_on(*n.phi, Q.lo[1], Q.hi[1])) {
              for (int region = 0; region < 3; ++region) {
                const Rational a = std::max(Q.lo[0], cuts[region]);
                const Rational b = std::min(Q.hi[0], cuts[region + 1]);
                if (!(b > a)) continue;
                AffineCell c = identity_cell(Q);
                c.box.lo[0] = a;
                c.box.hi[0] = b;
                c.box.lo[1] = p.lo;
                c.box.hi[1] = p.hi;
                if (region == 1) {
                  c.A[1] = p.slope;
                  c.b[0] = p.icpt;
                } else if (sgn(p.slope) != 0) {
                  throw UnsupportedExpression(
                      "slide taper region is bilinear where phi is not constant");
                } else if (region == 0) {
                  c.A[0] = 1 + p.icpt / n.delta_lo;
                } else {
                  c.A[0] = 1 - p.icpt / n.delta_hi;
                  c.b[0] = p.icpt / n.delta_hi;
                }
                out.push_back(std::move(c));
              }
            }
            return out;
          },
          [&](const ComposeNode& n) {
            std::vector<AffineCell> out;
            for (const AffineCell& in : cells_of(n.inner, Q)) {
              if (!is_diagonal(in, d))
                throw UnsupportedExpression("composition with a non-diagonal inner map");
              RBox image = in.box;
              for (int i = 0; i < d; ++i) {
                const Rational& a = in.A[i * d + i];
                if (sgn(a) <= 0) throw UnsupportedExpression("inner map must be increasing per axis");
                image.lo[i] = a * in.box.lo[i] + in.b[i];
                image.hi[i] = a * in.box.hi[i] + in.b[i];
              }
              for (const AffineCell& o : cells_of(n.outer, image)) {
                AffineCell c = identity_cell(Q);
                for (int i = 0; i < d; ++i) {
                  const Rational& a = in.A[i * d + i];
                  c.box.lo[i] = (o.box.lo[i] - in.b[i]) / a;
                  c.box.hi[i] = (o.box.hi[i] - in.b[i]) / a;
                }
                for (int i = 0; i < d; ++i) {
                  for (int j = 0; j < d; ++j) c.A[i * d + j] = o.A[i * d + j] * in.A[j * d + j];
                  Rational acc = o.b[i];
                  for (int j = 0; j < d; ++j) acc += o.A[i * d + j] * in.b[j];
                  c.b[i] = acc;
                }
                out.push_back(std::move(c));
              }
            }
            return out;
          },
          [&](const InverseNode& n) {
            return std::visit(
                overloaded{
                    [&](const IdentityNode&) { return std::vector<AffineCell>{identity_cell(Q)}; },
                    [&](const Product1DNode& p) {
                      std::vector<std::vector<Piece1D>> axes;
                      for (int i = 0; i < d; ++i)
                        axes.push_back(pieces_on(singhom::inverse(*p.f[i]), Q.lo[i], Q.hi[i]));
                      return product_cells(axes, Q);
                    },
                    [&](const auto&) -> std::vector<AffineCell> {
                      throw UnsupportedExpression("inverse of a " + n.inner.kind() +
                                                  " has no affine cell decomposition here");
                    },
                },
                n.inner.node().v);
          },
          [&](const auto&) -> std::vector<AffineCell> {
            throw UnsupportedExpression(e.kind() + " is not piecewise affine");
          },
      },
      e.node().v);
}

Rational determinant(std::vector<Rational> m, int d) {
  Rational det = 1;
  for (int c = 0; c < d; ++c) {
    int pivot = -1;
    for (int r = c; r < d; ++r)
      if (sgn(m[r * d + c]) != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) return 0;
    if (pivot != c) {
      for (int k = 0; k < d; ++k) std::swap(m[pivot * d + k], m[c * d + k]);
      det = -det;
    }
    det *= m[c * d + c];
    for (int r = c + 1; r < d; ++r) {
      const Rational f = m[r * d + c] / m[c * d + c];
      if (sgn(f) == 0) continue;
      for (int k = c; k < d; ++k) m[r * d + k] -= f * m[c * d + k];
    }
  }
  return det;
}

}  // namespace

std::vector<AffineCell> affine_cells(const HomeoExpr& e, const RBox& Q) {
  if (Q.dim() != e.dim()) throw PreconditionError("domain box has the wrong dimension");
  for (int i = 0; i < Q.dim(); ++i)
    if (Q.lo[i] < 0 || Q.hi[i] > 1 || Q.lo[i] > Q.hi[i])
      throw DomainError("domain box must lie in the unit cube");
  return cells_of(e, Q);
}

Rational gram_determinant(const std::vector<Rational>& A, int d) {
  // Rows of the stacked 2d x d matrix [I; A].
  auto row = [&](int r, int c) -> Rational {
    if (r < d) return Rational(r == c ? 1 : 0);
    return A[(r - d) * d + c];
  };
  Rational total = 0;
  std::vector<int> pick(d);
  for (int i = 0; i < d; ++i) pick[i] = i;
  while (true) {
    std::vector<Rational> minor(d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) minor[i * d + j] = row(pick[i], j);
    const Rational det = determinant(std::move(minor), d);
    total += det * det;
    int i = d - 1;
    while (i >= 0 && pick[i] == 2 * d - d + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < d; ++j) pick[j] = pick[j - 1] + 1;
  }
  return total;
}

AreaReport graph_area_pa(const HomeoExpr& e, const RBox& Q) {
  const int d = e.dim();
  AreaReport out;
  for (const AffineCell& c : affine_cells(e, Q)) {
    const Rational vol = c.box.volume();
    if (sgn(vol) == 0) continue;
    const Rational v2 = vol * vol * gram_determinant(c.A, d);
    out.area += std::sqrt(to_double(v2));
    out.lower += sqrt_lower(v2);
    out.upper += sqrt_upper(v2);
    ++out.cells;
  }
  return out;
}

// ---------------------------------------------------------------------------

LengthAnalysis length_analysis(const PLFunc& f, unsigned n) {
  if (!f.monotone_homeo()) throw InvariantViolation("length analysis needs a monotone homeomorphism");
  if (n == 0) throw PreconditionError("length analysis needs n >= 1");
  std::vector<Rational> part(f.xs());
  for (unsigned j = 1; j <= n; ++j) part.emplace_back(j, n + 1);
  for (auto& q : part) q.canonicalize();
  std::sort(part.begin(), part.end());
  part.erase(std::unique(part.begin(), part.end()), part.end());

  LengthAnalysis out;
  out.n = n;
  out.partition_size = part.size();
  const Rational inv_n(1, n);
  Rational prev_y = 0;
  for (std::size_t i = 1; i < part.size(); ++i) {
    const Rational dx = part[i] - part[i - 1];
    const Rational y = f.eval(part[i]);
    const Rational dy = y - prev_y;
    prev_y = y;
    out.mesh = std::max(out.mesh, dx);
    const double seg = std::sqrt(to_double(dx * dx + dy * dy));
    out.ell_n += seg;
    const double w = to_double(dx + dy) - seg;
    out.deficits.push_back(w);
    out.deficit_sum += w;
    if (dy <= inv_n * dx) out.flat_measure += dx;
  }
  const double two_minus = 2.0 - std::ldexp(1.0, -static_cast<int>(std::min(n, 1000u)));
  out.near_two = out.ell_n >= two_minus;
  out.flat_bound = 1 - Rational(n + 1) * pow2(-static_cast<long>(n));
  out.flat_bound_holds = out.flat_measure >= out.flat_bound;
  out.deficit_inequality =
      to_double((1 - out.flat_measure) / (n + 1)) <= (2.0 - out.ell_n) * (1 + 1e-12) + 1e-15;
  return out;
}

// ---------------------------------------------------------------------------

CoverReport box_cover_upper(const HomeoExpr& e, const RBox& Q, unsigned k_lo, unsigned k_hi) {
  const int d = e.dim();
  if (k_lo > k_hi) throw PreconditionError("empty scale range");
  if (static_cast<long>(k_hi) * d > 40) throw PreconditionError("cover scale too fine for this dimension");
  CoverReport out;
  const Box Qd = Q.to_double();
  for (unsigned k = k_lo; k <= k_hi; ++k) {
    const double delta = std::ldexp(1.0, -static_cast<int>(k));
    const double side = static_cast<double>(1L << k);
    std::vector<std::pair<long, long>> dom(d);
    for (int i = 0; i < d; ++i) dom[i] = grid_range(Q.lo[i], Q.hi[i], k);
    std::vector<long> idx(d);
    for (int i = 0; i < d; ++i) idx[i] = dom[i].first;
    std::uint64_t count = 0;
    while (true) {
      Box cell{Point(d), Point(d)};
      for (int i = 0; i < d; ++i) {
        cell.lo[i] = std::max(Qd.lo[i], idx[i] * delta);
        cell.hi[i] = std::min(Qd.hi[i], (idx[i] + 1) * delta);
      }
      const Enclosure enc = e.enclose(cell);
      out.certified = out.certified && enc.certified;
      std::uint64_t targets = 1;
      for (int i = 0; i < d; ++i) {
        const long top = (1L << k) - 1;
        long a = static_cast<long>(std::floor(enc.box.lo[i] * side));
        long b = static_cast<long>(std::ceil(enc.box.hi[i] * side)) - 1;
        a = std::clamp(a, 0L, top);
        b = std::clamp(b, 0L, top);
        targets *= static_cast<std::uint64_t>(std::max(b - a + 1, 1L));
      }
      count += targets;
      int i = 0;
      while (i < d && ++idx[i] > dom[i].second) {
        idx[i] = dom[i].first;
        ++i;
      }
      if (i == d) break;
    }
    const double diam = delta * std::sqrt(2.0 * d);
    out.rows.push_back({k, count, static_cast<double>(count) * std::pow(diam, d), 0});
  }
  // A cover at scale 2^{-j} is admissible for every delta >= 2^{-j}.
  double best = INFINITY;
  for (auto it = out.rows.rbegin(); it != out.rows.rend(); ++it) it->h_delta = best = std::min(best, it->value);
  out.upper = out.rows.back().value;
  return out;
}

// ---------------------------------------------------------------------------
// Mass distribution.

namespace {

const SlideNode* slide_of(const HomeoExpr& e) {
  if (const auto* s = std::get_if<SlideNode>(&e.node().v)) return s;
  if (const auto* c = std::get_if<ComposeNode>(&e.node().v)) {
    if (std::holds_alternative<IdentityNode>(c->outer.node().v))
      return std::get_if<SlideNode>(&c->inner.node().v);
    if (std::holds_alternative<IdentityNode>(c->inner.node().v))
      return std::get_if<SlideNode>(&c->outer.node().v);
  }
  return nullptr;
}

void finish_row(MassRow& row, const Rational& total, unsigned n, int d, MassReport& rep,
                const MassOptions& opt) {
  row.d = d;
  const double cell = std::ldexp(1.0, -static_cast<int>(n) * d);
  const double tot = to_double(total);
  if (row.max_mass > 0) {
    row.lower_sup = tot * cell / row.max_mass;
    row.lower_euclid = tot * cell * std::pow(std::sqrt(2.0 * d), d) / row.max_mass;
  }
  if (opt.q) {
    row.q = opt.q(n);
    const Rational limit = *row.q * pow2(-static_cast<long>(n) * d);
    row.bound_ok = row.max_mass_exact ? *row.max_mass_exact <= limit
                                      : row.max_mass <= to_double(limit);
    if (!row.bound_ok) ++rep.violations;
  }
  rep.rows.push_back(row);
}

// The principle needs mu(U) <= c diam(U)^d for every small set U, not only
// for dyadic boxes. A set of sup-diameter r in (2^{-m-1}, 2^{-m}] meets at
// most 2^d dyadic cubes of side 2^{-m} in the domain and 2^d in the image,
// so mu(U) / r^d <= 8^d M_m 2^{md}; its domain projection also gives
// mu(U) <= r^d. The constant usable below 2^{-n} is the worst of these over
// the enumerated scales m >= n.
MassReport& finalize(MassReport& rep) {
  double worst = 0;
  for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) {
    const double ratio = it->max_mass * std::ldexp(1.0, static_cast<int>(it->n) * it->d + 3 * it->d);
    worst = std::max(worst, std::min(1.0, ratio));
    it->lower_valid = worst > 0 ? to_double(rep.total_mass) / worst : 0;
  }
  rep.lower = 0;
  for (const MassRow& row : rep.rows)
    if (row.lower_valid > rep.lower) {
      rep.lower = row.lower_valid;
      rep.best_scale = row.n;
    }
  return rep;
}

// mu(Q1 x Q2) for the middle region of a slide: the coordinates past the
// second contribute |I_i ∩ Q_i| (maximal when K_i = I_i), the second
// coordinate is best taken with K_2 = I_2, and the first gives
// integral over x2 in R_2 of |R_1 ∩ (K_1 - phi(x2))|.
MassRow slide_scale(const SlideNode& s, const RBox& Q, unsigned n, const MassOptions& opt) {
  const int d = s.d;
  const Rational delta = pow2(-static_cast<long>(n));
  Rational tail = 1;
  for (int i = 2; i < d; ++i) {
    const auto [a, b] = grid_range(Q.lo[i], Q.hi[i], n);
    Rational best = 0;
    for (long j = a; j <= b; ++j)
      best = std::max(best, overlap(Q.lo[i], Q.hi[i], delta * j, delta * (j + 1)));
    tail *= best;
  }
  std::vector<Interval> r1;
  {
    const auto [a, b] = grid_range(Q.lo[0], Q.hi[0], n);
    for (long j = a; j <= b; ++j) {
      const Rational lo = std::max(Q.lo[0], Rational(delta * j));
      const Rational hi = std::min(Q.hi[0], Rational(delta * (j + 1)));
      if (hi > lo) r1.push_back({lo, hi});
    }
  }
  const long top = (1L << n) - 1;
  Rational best = 0;
  const auto [a2, b2] = grid_range(Q.lo[1], Q.hi[1], n);
  for (long j2 = a2; j2 <= b2; ++j2) {
    const Interval R2{std::max(Q.lo[1], Rational(delta * j2)), std::min(Q.hi[1], Rational(delta * (j2 + 1)))};
    if (!(R2.hi > R2.lo)) continue;
    const Pushforward nu = opt.density ? opt.density(R2) : pushforward(*s.phi, R2);
    Rational tmin, tmax;
    bool first = true;
    auto see = [&](const Rational& t) {
      if (first || t < tmin) tmin = t;
      if (first || t > tmax) tmax = t;
      first = false;
    };
    for (const auto& g : nu.segs) {
      see(g.y0);
      see(g.y1);
    }
    for (const auto& p : nu.atoms) see(p.y);
    if (first) continue;
    std::map<std::pair<Rational, Rational>, Rational> memo;
    for (const Interval& R1 : r1) {
      const long k_a = std::max(0L, floor_q((R1.lo + tmin) / delta).get_si() - 1);
      const long k_b = std::min(top, ceil_q((R1.hi + tmax) / delta).get_si());
      for (long k = k_a; k <= k_b; ++k) {
        const Rational c = delta * k;
        const auto key = std::make_pair(Rational(R1.hi - R1.lo), Rational(c - R1.lo));
        auto it = memo.find(key);
        if (it == memo.end()) {
          // u = c - t runs over [c - y1, c - y0] as t runs over [y0, y1].
          Rational m = 0;
          for (const auto& g : nu.segs)
            m += g.density * trapezoid_integral(R1.lo, R1.hi, delta, c - g.y1, c - g.y0);
          for (const auto& p : nu.atoms) m += p.mass * trapezoid_value(R1.lo, R1.hi, delta, c - p.y);
          it = memo.emplace(key, m).first;
        }
        best = std::max(best, it->second);
      }
    }
  }
  MassRow row;
  row.n = n;
  row.max_mass_exact = best * tail;
  row.max_mass = to_double(*row.max_mass_exact);
  return row;
}

bool shear_form(const AffineCell& c, int d) {
  for (int i = 0; i < d; ++i) {
    if (sgn(c.A[i * d + i]) <= 0) return false;
    for (int j = 0; j < d; ++j)
      if (i != j && !(i == 0 && j == 1) && sgn(c.A[i * d + j]) != 0) return false;
  }
  return true;
}

// Exact masses of every box pair from the affine cells. Coordinates past
// the second transform independently, the first two through a shear.
MassRow cells_scale(const std::vector<AffineCell>& cells, int d, unsigned n) {
  const Rational delta = pow2(-static_cast<long>(n));
  std::map<std::vector<long>, Rational> acc;
  for (const AffineCell& c : cells) {
    if (sgn(c.box.volume()) == 0) continue;
    std::vector<std::pair<long, long>> q1(d);
    for (int i = 0; i < d; ++i) q1[i] = grid_range(c.box.lo[i], c.box.hi[i], n);
    std::vector<long> i1(d);
    for (int i = 0; i < d; ++i) i1[i] = q1[i].first;
    while (true) {
      RBox S = c.box;
      bool empty = false;
      for (int i = 0; i < d; ++i) {
        S.lo[i] = std::max(c.box.lo[i], Rational(delta * i1[i]));
        S.hi[i] = std::min(c.box.hi[i], Rational(delta * (i1[i] + 1)));
        empty = empty || !(S.hi[i] > S.lo[i]);
      }
      if (!empty) {
        // Per-axis candidate target indices and x-lengths for axes >= 1.
        std::vector<std::vector<std::pair<long, Interval>>> axis(d);
        for (int i = 1; i < d; ++i) {
          const Rational& a = c.A[i * d + i];
          const Rational y0 = a * S.lo[i] + c.b[i], y1 = a * S.hi[i] + c.b[i];
          const auto [ka, kb] = grid_range(y0, y1, n);
          for (long k = ka; k <= kb; ++k) {
            const Rational lo = std::max(S.lo[i], Rational((delta * k - c.b[i]) / a));
            const Rational hi = std::min(S.hi[i], Rational((delta * (k + 1) - c.b[i]) / a));
            if (hi > lo) axis[i].push_back({k, Interval{lo, hi}});
          }
        }
        const Rational& a11 = c.A[0];
        const Rational a12 = d >= 2 ? c.A[1] : Rational(0);
        auto y1_at = [&](const Rational& x1, const Rational& x2) -> Rational { return a11 * x1 + a12 * x2 + c.b[0]; };
        auto emit = [&](std::vector<long> key, const Rational& m) {
          if (sgn(m) == 0) return;
          acc[key] += m;
        };
        std::vector<long> key(2 * d);
        for (int i = 0; i < d; ++i) key[i] = i1[i];
        if (d == 1) {
          const auto [ka, kb] = grid_range(y1_at(S.lo[0], 0), y1_at(S.hi[0], 0), n);
          for (long k = ka; k <= kb; ++k) {
            key[1] = k;
            emit(key, overlap(S.lo[0], S.hi[0], (delta * k - c.b[0]) / a11,
                              (delta * (k + 1) - c.b[0]) / a11));
          }
        } else {
          // Tail product over axes >= 2 enumerated as an odometer.
          std::vector<std::size_t> t(d, 0);
          bool tail_empty = false;
          for (int i = 2; i < d; ++i) tail_empty = tail_empty || axis[i].empty();
          if (!tail_empty) {
            while (true) {
              Rational tail = 1;
              for (int i = 2; i < d; ++i) {
                key[d + i] = axis[i][t[i]].first;
                tail *= axis[i][t[i]].second.length();
              }
              for (const auto& [k2, X2] : axis[1]) {
                key[d + 1] = k2;
                Rational ylo = y1_at(S.lo[0], X2.lo), yhi = ylo;
                for (const Rational& x1 : {S.lo[0], S.hi[0]})
                  for (const Rational& x2 : {X2.lo, X2.hi}) {
                    ylo = std::min(ylo, y1_at(x1, x2));
                    yhi = std::max(yhi, y1_at(x1, x2));
                  }
                const auto [ka, kb] = grid_range(ylo, yhi, n);
                for (long k = ka; k <= kb; ++k) {
                  key[d] = k;
                  // x1 in [(k delta - b1 - a12 x2)/a11, ... + delta/a11].
                  const Rational w = delta / a11;
                  auto u = [&](const Rational& x2) -> Rational { return (delta * k - c.b[0] - a12 * x2) / a11; };
                  Rational m;
                  if (sgn(a12) == 0) {
                    m = trapezoid_value(S.lo[0], S.hi[0], w, u(X2.lo)) * X2.length();
                  } else {
                    const Rational ua = std::min(u(X2.lo), u(X2.hi)), ub = std::max(u(X2.lo), u(X2.hi));
                    m = trapezoid_integral(S.lo[0], S.hi[0], w, ua, ub) / abs(Rational(a12 / a11));
                  }
                  emit(key, m * tail);
                }
              }
              int i = 2;
              while (i < d && ++t[i] == axis[i].size()) t[i++] = 0;
              if (i >= d) break;
            }
          }
        }
      }
      int i = 0;
      while (i < d && ++i1[i] > q1[i].second) {
        i1[i] = q1[i].first;
        ++i;
      }
      if (i == d) break;
    }
  }
  MassRow row;
  row.n = n;
  Rational best = 0;
  for (const auto& [k, m] : acc) best = std::max(best, m);
  row.max_mass_exact = best;
  row.max_mass = to_double(best);
  return row;
}

MassRow mc_scale(const HomeoExpr& e, const RBox& Q, unsigned n, const MassOptions& opt) {
  const int d = e.dim();
  if (2u * d * n > 64) throw PreconditionError("Monte Carlo box key overflows at this scale");
  const Box Qd = Q.to_double();
  const double side = std::ldexp(1.0, static_cast<int>(n));
  const std::uint64_t top = (std::uint64_t{1} << n) - 1;
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  SplitMix64 rng = SplitMix64::split(opt.seed, n);
  Point x(d);
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(Qd.lo[i], Qd.hi[i]);
    const Point y = e.eval(x);
    std::uint64_t key = 0;
    for (int i = 0; i < d; ++i)
      key = (key << n) | std::min(top, static_cast<std::uint64_t>(x[i] * side));
    for (int i = 0; i < d; ++i)
      key = (key << n) | std::min(top, static_cast<std::uint64_t>(y[i] * side));
    ++counts[key];
  }
  std::uint64_t best = 0;
  for (const auto& [k, c] : counts) best = std::max(best, c);
  const double vol = to_double(Q.volume());
  const double p = static_cast<double>(best) / static_cast<double>(opt.mc_samples);
  MassRow row;
  row.n = n;
  row.max_mass = vol * p;
  row.stderr_max = vol * std::sqrt(p * (1 - p) / static_cast<double>(opt.mc_samples));
  return row;
}

}  // namespace

MassReport mass_distribution_lower(const HomeoExpr& e, const RBox& Q, unsigned n_lo, unsigned n_hi,
                                   const MassOptions& opt) {
  const int d = e.dim();
  if (Q.dim() != d) throw PreconditionError("domain box has the wrong dimension");
  if (n_lo > n_hi) throw PreconditionError("empty scale range");
  if (n_hi > 30) throw PreconditionError("scale too fine");
  MassReport rep;
  rep.total_mass = Q.volume();

  const SlideNode* s = slide_of(e);
  if (s && Q.lo[0] >= s->delta_lo && Q.hi[0] <= 1 - s->delta_hi) {
    rep.mode = "slide-density";
    for (unsigned n = n_lo; n <= n_hi; ++n) {
      MassRow row = slide_scale(*s, Q, n, opt);
      finish_row(row, rep.total_mass, n, d, rep, opt);
    }
    return finalize(rep);
  }

  std::optional<std::vector<AffineCell>> cells;
  try {
    cells = affine_cells(e, Q);
    for (const auto& c : *cells)
      if (!shear_form(c, d)) {
        cells.reset();
        break;
      }
  } catch (const UnsupportedExpression&) {
    cells.reset();
  }
  if (cells) {
    rep.mode = "exact-cells";
    for (unsigned n = n_lo; n <= n_hi; ++n) {
      MassRow row = cells_scale(*cells, d, n);
      finish_row(row, rep.total_mass, n, d, rep, opt);
    }
    return finalize(rep);
  }
  if (!opt.allow_mc) throw UnsupportedExpression("graph measure of " + e.kind() + " is not exact");
  rep.mode = "monte-carlo";
  for (unsigned n = n_lo; n <= n_hi; ++n) {
    MassRow row = mc_scale(e, Q, n, opt);
    finish_row(row, rep.total_mass, n, d, rep, opt);
  }
  return finalize(rep);
}

// ---------------------------------------------------------------------------
// Pushforward histograms.

namespace {

// One increasing 1-D step of a separable chain.
struct Step {
  const PLFunc* pl = nullptr;  // null for a power
  double s = 1;
  bool inverted = false;
};
using Chain = std::vector<Step>;

// Per-coordinate chains in application order, or nullopt.
std::optional<std::vector<Chain>> chains_of(const HomeoExpr& e) {
  const int d = e.dim();
  return std::visit(
      overloaded{
          [&](const IdentityNode&) -> std::optional<std::vector<Chain>> { return std::vector<Chain>(d); },
          [&](const Product1DNode& n) -> std::optional<std::vector<Chain>> {
            std::vector<Chain> out(d);
            for (int i = 0; i < d; ++i) out[i].push_back({n.f[i].get(), 1, false});
            return out;
          },
          [&](const PowerMapNode& n) -> std::optional<std::vector<Chain>> {
            std::vector<Chain> out(d);
            for (int i = 0; i < d; ++i) out[i].push_back({nullptr, n.s[i], false});
            return out;
          },
          [&](const ComposeNode& n) -> std::optional<std::vector<Chain>> {
            auto in = chains_of(n.inner);
            auto out = chains_of(n.outer);
            if (!in || !out) return std::nullopt;
            for (int i = 0; i < d; ++i) (*in)[i].insert((*in)[i].end(), (*out)[i].begin(), (*out)[i].end());
            return in;
          },
          [&](const InverseNode& n) -> std::optional<std::vector<Chain>> {
            auto in = chains_of(n.inner);
            if (!in) return std::nullopt;
            for (auto& c : *in) {
              std::reverse(c.begin(), c.end());
              for (auto& st : c) st.inverted = !st.inverted;
            }
            return in;
          },
          [&](const auto&) -> std::optional<std::vector<Chain>> { return std::nullopt; },
      },
      e.node().v);
}

bool chain_is_rational(const Chain& c) {
  return std::all_of(c.begin(), c.end(), [](const Step& s) { return s.pl != nullptr; });
}

double chain_inverse(const Chain& c, double y) {
  for (auto it = c.rbegin(); it != c.rend(); ++it) {
    if (it->pl) {
      y = it->inverted ? it->pl->eval(y) : it->pl->inverse_eval(y);
    } else {
      y = it->inverted ? std::pow(y, it->s) : std::pow(y, 1.0 / it->s);
    }
  }
  return y;
}

double chain_forward(const Chain& c, double x) {
  for (const Step& st : c) {
    if (st.pl) {
      x = st.inverted ? st.pl->inverse_eval(x) : st.pl->eval(x);
    } else {
      x = st.inverted ? std::pow(x, 1.0 / st.s) : std::pow(x, st.s);
    }
  }
  return x;
}

Rational chain_inverse(const Chain& c, Rational y) {
  for (auto it = c.rbegin(); it != c.rend(); ++it)
    y = it->inverted ? it->pl->eval(y) : it->pl->inverse_eval(y);
  return y;
}

std::vector<Rational> exact_marginal(const Chain& c, unsigned k) {
  const std::size_t cells = std::size_t{1} << k;
  std::vector<Rational> edges(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j) edges[j] = chain_inverse(c, Rational(j) * pow2(-static_cast<long>(k)));
  std::vector<Rational> out(cells);
  for (std::size_t j = 0; j < cells; ++j) out[j] = edges[j + 1] - edges[j];
  return out;
}

std::vector<double> double_marginal(const Chain& c, unsigned k) {
  const std::size_t cells = std::size_t{1} << k;
  std::vector<double> edges(cells + 1);
  for (std::size_t j = 0; j <= cells; ++j) edges[j] = chain_inverse(c, std::ldexp(static_cast<double>(j), -static_cast<int>(k)));
  std::vector<double> out(cells);
  for (std::size_t j = 0; j < cells; ++j) out[j] = edges[j + 1] - edges[j];
  return out;
}

}  // namespace

std::optional<std::vector<std::vector<double>>> separable_marginals(const HomeoExpr& e, unsigned k) {
  auto chains = chains_of(e);
  if (!chains) return std::nullopt;
  std::vector<std::vector<double>> out;
  for (const Chain& c : *chains) out.push_back(double_marginal(c, k));
  return out;
}

OccupationHist pushforward_hist(const HomeoExpr& e, unsigned k, const HistOptions& opt) {
  const int d = e.dim();
  if (k == 0) throw PreconditionError("histogram resolution must be at least 1");
  if (static_cast<long>(k) * d > 26) throw PreconditionError("histogram too large");
  OccupationHist h;
  h.k = k;
  h.d = d;
  const std::size_t side = std::size_t{1} << k;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= side;

  if (auto chains = chains_of(e)) {
    h.exact = true;
    const bool rational = std::all_of(chains->begin(), chains->end(), chain_is_rational);
    h.mass.assign(total, 0.0);
    if (rational) {
      std::vector<std::vector<Rational>> marg;
      for (const Chain& c : *chains) marg.push_back(exact_marginal(c, k));
      h.exact_mass.resize(total);
      for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        Rational m = 1;
        for (int i = 0; i < d; ++i) {
          m *= marg[i][rem % side];
          rem /= side;
        }
        h.mass[idx] = to_double(m);
        h.exact_mass[idx] = std::move(m);
      }
    } else {
      std::vector<std::vector<double>> marg;
      for (const Chain& c : *chains) marg.push_back(double_marginal(c, k));
      for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        double m = 1;
        for (int i = 0; i < d; ++i) {
          m *= marg[i][rem % side];
          rem /= side;
        }
        h.mass[idx] = m;
      }
    }
    return h;
  }

  std::vector<std::uint64_t> counts(total, 0);
  SplitMix64 rng(opt.seed);
  Point x(d);
  for (std::size_t s = 0; s < opt.mc_samples; ++s) {
    for (auto& v : x) v = rng.uniform();
    const Point y = e.eval(x);
    std::size_t idx = 0;
    for (int i = d - 1; i >= 0; --i)
      idx = idx * side + std::min(side - 1, static_cast<std::size_t>(y[i] * static_cast<double>(side)));
    ++counts[idx];
  }
  h.mass.resize(total);
  const double N = static_cast<double>(opt.mc_samples);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const double p = static_cast<double>(counts[idx]) / N;
    h.mass[idx] = p;
    h.stderr_max = std::max(h.stderr_max, std::sqrt(p * (1 - p) / N));
  }
  return h;
}

double singularity_score(const OccupationHist& h, double eps) {
  if (!(eps > 0 && eps < 1)) throw PreconditionError("singularity score needs 0 < eps < 1");
  const double cell = std::ldexp(1.0, -static_cast<int>(h.k) * h.d);
  if (!h.exact_mass.empty()) {
    // Exact path: eps is read as the decimal it prints as (0.1 means 1/10).
    const Rational target = 1 - parse_rational(std::to_string(eps));
    std::vector<const Rational*> order;
    order.reserve(h.exact_mass.size());
    for (const auto& m : h.exact_mass) order.push_back(&m);
    std::sort(order.begin(), order.end(), [](const Rational* a, const Rational* b) { return *a > *b; });
    Rational acc = 0;
    std::size_t used = 0;
    while (used < order.size() && acc < target) acc += *order[used++];
    return static_cast<double>(used) * cell;
  }
  std::vector<double> m(h.mass);
  std::sort(m.begin(), m.end(), std::greater<double>());
  const double target = 1.0 - eps;
  double acc = 0;
  std::size_t used = 0;
  while (used < m.size() && acc < target) acc += m[used++];
  return static_cast<double>(used) * cell;
}

// ---------------------------------------------------------------------------

LocalRatio local_ratio(const HomeoExpr& e, const Point& x, double r, std::size_t mc_samples,
                       std::uint64_t seed) {
  const int d = e.dim();
  if (static_cast<int>(x.size()) != d) throw PreconditionError("point has the wrong dimension");
  if (!(r > 0)) throw PreconditionError("radius must be positive");
  Box B{Point(d), Point(d)};
  double vol = 1;
  for (int i = 0; i < d; ++i) {
    B.lo[i] = std::max(0.0, x[i] - r);
    B.hi[i] = std::min(1.0, x[i] + r);
    vol *= B.hi[i] - B.lo[i];
  }
  LocalRatio out;
  const double ball = std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1);
  out.ball_factor = std::pow(2.0, d) / ball;
  if (auto chains = chains_of(e)) {
    double img = 1;
    for (int i = 0; i < d; ++i)
      img *= chain_forward((*chains)[i], B.hi[i]) - chain_forward((*chains)[i], B.lo[i]);
    out.ratio = img / vol;
    return out;
  }
  out.exact = false;
  const Enclosure enc = e.enclose(B);
  double evol = 1;
  for (int i = 0; i < d; ++i) evol *= enc.box.hi[i] - enc.box.lo[i];
  SplitMix64 rng(seed);
  std::size_t hits = 0;
  Point y(d);
  for (std::size_t s = 0; s < mc_samples; ++s) {
    for (int i = 0; i < d; ++i) y[i] = rng.uniform(enc.box.lo[i], enc.box.hi[i]);
    const Point p = e.inverse_eval(y);
    bool in = true;
    for (int i = 0; i < d && in; ++i) in = p[i] >= B.lo[i] && p[i] <= B.hi[i];
    hits += in;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(mc_samples);
  out.ratio = evol * frac / vol;
  out.stderr_ = evol * std::sqrt(frac * (1 - frac) / static_cast<double>(mc_samples)) / vol;
  return out;
}

std::vector<ProfileRow> diff_quotient_profile(const HomeoExpr& e, const Point& x, unsigned n_lo,
                                              unsigned n_hi, ProbeFrame frame) {
  const int d = e.dim();
  if (static_cast<int>(x.size()) != d) throw PreconditionError("point has the wrong dimension");
  const Point fx = e.eval(x);
  std::vector<ProfileRow> out;
  auto dist = [](const Point& a, const Point& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  auto inside = [](const Point& p) {
    return std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
  };

  if (frame == ProbeFrame::Cube) {
    std::vector<Point> dirs;
    for (int i = 0; i < d; ++i)
      for (double sgn_ : {1.0, -1.0}) {
        Point v(d, 0.0);
        v[i] = sgn_;
        dirs.push_back(v);
      }
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      Point v(d);
      for (int i = 0; i < d; ++i) v[i] = (mask >> i) & 1 ? -1.0 : 1.0;
      if (d > 1) dirs.push_back(v);
    }
    for (unsigned n = n_lo; n <= n_hi; ++n) {
      ProfileRow row{n, 0, 0};
      const double h0 = std::ldexp(1.0, -static_cast<int>(n));
      for (const Point& v : dirs)
        for (int j = 1; j <= 4; ++j) {
          Point y(d);
          for (int i = 0; i < d; ++i) y[i] = x[i] + v[i] * h0 * j / 4;
          if (!inside(y)) continue;
          const double q = dist(fx, e.eval(y)) / dist(x, y);
          if (q > row.quotient) row = {n, q, dist(x, y)};
        }
      out.push_back(row);
    }
    return out;
  }

  if (d < 2) throw PreconditionError("the cylinder frame needs d >= 2");
  const Point t = chart::to_cylinder(x);
  const Point ft = chart::to_cylinder(fx);
  const double r = std::hypot(t[0], t[1]);
  const double alpha = r > 0 ? std::atan2(t[1], t[0]) : 0.0;
  const auto* twist = std::get_if<RadialTwistNode>(&e.node().v);
  for (unsigned n = n_lo; n <= n_hi; ++n) {
    ProfileRow row{n, 0, 0};
    const double h0 = std::ldexp(1.0, -static_cast<int>(n));
    std::vector<double> radii;
    for (int j = 1; j <= 8; ++j) {
      radii.push_back(r + h0 * j / 8);
      if (r > 0) radii.push_back(r - h0 * j / 8);
    }
    // For a bare twist the extremes of the angular offset sit at breakpoints
    // of phi, so those radii are probed as well.
    if (twist)
      for (double b : twist->phi->xs_double())
        if (std::abs(b - r) <= h0 && b != r) radii.push_back(b);
    for (double r2 : radii) {
      if (!(r2 >= 0.0 && r2 <= 1.0)) continue;
      Point t2(t);
      t2[0] = r2 * std::cos(alpha);
      t2[1] = r2 * std::sin(alpha);
      const Point y = chart::from_cylinder(t2);
      const double dt = dist(t, t2);
      if (dt == 0.0) continue;
      const double q = dist(ft, chart::to_cylinder(e.eval(y))) / dt;
      if (q > row.quotient) row = {n, q, dt};
    }
    out.push_back(row);
  }
  return out;
}

OntoReport onto_check(const HomeoExpr& e, const Point& c, double alpha, double beta,
                      std::size_t samples, std::uint64_t seed, double damping) {
  const int d = e.dim();
  if (static_cast<int>(c.size()) != d) throw PreconditionError("center has the wrong dimension");
  OntoReport out;
  if (alpha >= beta) {
    out.vacuous = true;
    return out;
  }
  SplitMix64 rng(seed);
  auto draw_in_ball = [&](double radius) {
    Point p(d);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      double s = 0;
      bool in_cube = true;
      for (int i = 0; i < d; ++i) {
        const double u = rng.uniform(-1.0, 1.0);
        p[i] = c[i] + radius * u;
        s += u * u;
        in_cube = in_cube && p[i] >= 0.0 && p[i] <= 1.0;
      }
      if (s <= 1.0 && in_cube) return p;
    }
    throw PreconditionError("ball has no room inside the cube");
  };

  for (std::size_t k = 0; k < samples; ++k) {
    const Point x = draw_in_ball(beta);
    const Point y = e.eval(x);
    for (int i = 0; i < d; ++i) out.max_displacement = std::max(out.max_displacement, std::abs(y[i] - x[i]));
  }
  out.precondition_ok = out.max_displacement <= alpha;

  for (std::size_t k = 0; k < samples; ++k) {
    const Point y = draw_in_ball(beta - alpha);
    Point x(y);
    double res = 0;
    unsigned it = 0;
    for (; it < 500; ++it) {
      const Point fx = e.eval(x);
      res = 0;
      for (int i = 0; i < d; ++i) res = std::max(res, std::abs(fx[i] - y[i]));
      if (res < 1e-14) break;
      for (int i = 0; i < d; ++i) x[i] = std::min(1.0, std::max(0.0, x[i] - damping * (fx[i] - y[i])));
    }
    out.max_iterations = std::max(out.max_iterations, it);
    out.max_residual = std::max(out.max_residual, res);
    if (res > 1e-8 && out.counterexamples.size() < 10) out.counterexamples.push_back(y);
  }
  out.samples = samples;
  return out;
}

}  // namespace singhom
