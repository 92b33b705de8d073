#include "singhom/constructions.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "singhom/rng.hpp"

namespace singhom {

StronglySingular::StronglySingular(unsigned p, unsigned depth, bool keep_records)
    : p_(p), depth_(depth), keep_records_(keep_records) {
  if (p_ < 2) throw PreconditionError("gauge exponent p must be at least 2");
  if (depth_ == 0) throw PreconditionError("planted copies need depth >= 1");
  f_.push_back(PLFunc::identity());
  gap_.push_back({true});
  copies_.emplace_back();
}

void StronglySingular::build_through(unsigned m) {
  while (f_.size() <= m) {
    const unsigned n = static_cast<unsigned>(f_.size());
    const PLFunc& prev = f_.back();
    const auto& flags = gap_.back();
    const Rational target = pow2(-static_cast<long>(n));

    std::vector<Rational> xs, ys;
    std::vector<bool> gaps;
    std::vector<Copy> copies;
    xs.reserve(prev.size() * 3);
    ys.reserve(prev.size() * 3);

    // Emits the planted structure of one elementary interval, left end first.
    std::function<void(const Rational&, const Rational&, const Rational&, const Rational&,
                       const Rational&, unsigned, Copy*)>
        plant = [&](const Rational& e0, const Rational& e1, const Rational& g0, const Rational& g1,
                    const Rational& block_len, unsigned k, Copy* rec) {
          if (k == depth_) {
            xs.push_back(e0);
            ys.push_back(g0);
            gaps.push_back(false);
            return;
          }
          const Rational ell = block_len * CantorScheme::b(k + 1);
          Rational gauge = 1;
          for (unsigned i = 0; i < p_; ++i) gauge *= ell;
          const Rational y = std::min(gauge, Rational((g1 - g0) / 3));
          if (rec) {
            rec->elementary.push_back({k + 1, Interval{e0, e0 + ell}, y});
            rec->elementary.push_back({k + 1, Interval{e1 - ell, e1}, y});
          }
          plant(e0, e0 + ell, g0, g0 + y, block_len, k + 1, rec);
          xs.push_back(e0 + ell);
          ys.push_back(g0 + y);
          gaps.push_back(true);
          plant(e1 - ell, e1, g1 - y, g1, block_len, k + 1, rec);
        };

    const auto& px = prev.xs();
    const auto& py = prev.ys();
    for (std::size_t i = 0; i + 1 < px.size(); ++i) {
      if (!flags[i]) {
        xs.push_back(px[i]);
        ys.push_back(py[i]);
        gaps.push_back(false);
        continue;
      }
      const Rational gap_len = px[i + 1] - px[i];
      const Rational image = py[i + 1] - py[i];
      const unsigned e = FillScheme::dyadic_exponent(gap_len);
      // Smallest dyadic block length whose image is at most 2^{-n}.
      unsigned N = e;
      Rational block_image = image;
      while (block_image > target) {
        ++N;
        block_image /= 2;
      }
      const Rational w = pow2(-static_cast<long>(N));
      Rational a = px[i], ga = py[i];
      for (; a < px[i + 1]; a += w, ga += block_image) {
        Copy* rec = nullptr;
        if (keep_records_) {
          copies.push_back(Copy{n, Interval{a, a + w}, {}});
          rec = &copies.back();
        }
        plant(a, a + w, ga, ga + block_image, w, 0, rec);
      }
    }
    xs.push_back(px.back());
    ys.push_back(py.back());
    f_.emplace_back(std::move(xs), std::move(ys));
    gap_.push_back(std::move(gaps));
    copies_.push_back(std::move(copies));
  }
}

const PLFunc& StronglySingular::stage(unsigned m) {
  build_through(m);
  return f_[m];
}

const std::vector<bool>& StronglySingular::gap_flags(unsigned m) {
  build_through(m);
  return gap_[m];
}

const std::vector<StronglySingular::Copy>& StronglySingular::copies(unsigned m) {
  if (!keep_records_) throw PreconditionError("copy records were not kept");
  build_through(m);
  return copies_[m];
}

Rational StronglySingular::enumerated_gap_measure(unsigned m) {
  build_through(m);
  const auto& xs = f_[m].xs();
  Rational total = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (gap_[m][i]) total += xs[i + 1] - xs[i];
  return total;
}

PLFunc strongly_singular_1d(unsigned m, unsigned p, unsigned depth) {
  StronglySingular s(p, depth);
  return s.stage(m);
}

WitnessSample witness_with(const HomeoExpr& f0, Point s, Point t) {
  HomeoExpr expr = HomeoExpr::compose(HomeoExpr::power_map(s),
                                      HomeoExpr::compose(f0, HomeoExpr::power_map(t)));
  return WitnessSample{std::move(s), std::move(t), std::move(expr), 0};
}

WitnessSample sample_witness(const HomeoExpr& f0, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int d = f0.dim();
  Point s(d), t(d);
  for (auto& v : s) v = rng.uniform(1.0, 2.0);
  for (auto& v : t) v = rng.uniform(1.0, 2.0);
  WitnessSample w = witness_with(f0, std::move(s), std::move(t));
  w.seed = seed;
  return w;
}

NowhereTwist build_nowhere_twist(const SSequence& s, const Rational& eps, unsigned stages, int d,
                                 unsigned span) {
  if (!(sgn(eps) > 0 && eps < 1)) throw PreconditionError("twist eps must lie in (0,1)");
  const double epsd = to_double(eps);

  // Smallest n with max{2^{-n}, 4 sqrt(s_n)} < eps.
  unsigned n_eps = 1;
  while (!(std::ldexp(1.0, -static_cast<int>(n_eps)) < epsd && 4 * std::sqrt(s.value(n_eps)) < epsd)) {
    if (++n_eps > 200) throw PreconditionError("s-sequence never drops below eps");
  }

  // phi = eps * (zig-zag for sigma_n >= 4 sqrt(s_n) / eps).
  const Rational shift = Rational(floor_log2(Rational(4 / eps)) +
                                  (pow2(floor_log2(Rational(4 / eps))) == 4 / eps ? 0 : 1));
  SSequence sigma(s.name() + "/sqrt", [s, shift](unsigned n) { return Rational(shift + s.log2(n) / 2); });
  Zigzag zig(sigma, stages);
  const unsigned top = zig.a(stages);

  NowhereTwist out{HomeoExpr::identity(d), PLFunc::identity(), PLFunc::identity(), 0, 0, 0, eps, {}};
  out.oscillation = oscillation_certificate(zig, stages, 1, top);
  // First n from which the oscillation bound holds on the next span+1 scales.
  unsigned n_cor = 0;
  for (unsigned n = 1; n + span <= top; ++n) {
    bool ok = true;
    for (unsigned k = n; k <= n + span; ++k) ok = ok && out.oscillation[k - 1].certified;
    if (ok) {
      n_cor = n;
      break;
    }
  }
  if (n_cor == 0)
    throw PreconditionError("zig-zag stage " + std::to_string(stages) +
                            " does not certify " + std::to_string(span + 1) + " consecutive scales");
  out.N = std::max(n_eps, n_cor);
  if (out.N + span > top)
    throw PreconditionError("twist needs more zig-zag stages to certify scales up to " +
                            std::to_string(out.N + span));
  out.n_hi = out.N + span;

  // h: h(2^{-n}) = s_n on the certified scales (plus two below), h(r) = r past eps.
  std::vector<Rational> hx{Rational(0)}, hy{Rational(0)};
  const unsigned deepest = out.n_hi + 2;
  for (unsigned n = deepest; n >= out.N; --n) {
    hx.push_back(pow2(-static_cast<long>(n)));
    hy.push_back(s.is_rational(n) ? s.exact(n) : from_double(s.value(n)));
    if (n == 0) break;
  }
  out.h_nodes_from = out.N;
  hx.push_back(eps);
  hy.push_back(eps);
  if (eps < 1) {
    hx.push_back(Rational(1));
    hy.push_back(Rational(1));
  }
  out.h = PLFunc(std::move(hx), std::move(hy));
  out.phi = zig.top().scaled(eps);
  out.expr = HomeoExpr::radial_twist(out.h, out.phi, d);
  return out;
}

double expand_eta_for(double eps, int d) { return eps / (2.0 * d); }

}  // namespace singhom
