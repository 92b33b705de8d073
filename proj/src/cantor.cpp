#include "singhom/cantor.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

namespace singhom {

CantorScheme::CantorScheme(Interval base) : base_(std::move(base)) {
  if (!(base_.lo < base_.hi)) throw DomainError("Cantor scheme base must have positive length");
}

Rational CantorScheme::b(unsigned n) {
  if (n == 0) return Rational(1);
  return pow2(-static_cast<long>(n + 1)) + pow2(-static_cast<long>(2 * n + 1));
}

Rational CantorScheme::elementary_length(unsigned n) const {
  Rational len = base_.length();
  for (unsigned k = 1; k <= n; ++k) len = (len - gap_length(k)) / 2;
  return len;
}

Rational CantorScheme::gap_length(unsigned k) const {
  return base_.length() * pow2(-2 * static_cast<long>(k));
}

namespace {

// j / 2^e in lowest terms.
Rational dyadic(std::uint64_t j, unsigned e) {
  Rational q;
  if (j == 0) return q;
  const unsigned tz = std::min<unsigned>(static_cast<unsigned>(__builtin_ctzll(j)), e);
  mpz_set_ui(q.get_num_mpz_t(), j >> tz);
  mpz_set_ui(q.get_den_mpz_t(), 1);
  mpz_mul_2exp(q.get_den_mpz_t(), q.get_den_mpz_t(), e - tz);
  return q;
}

}  // namespace

void CantorScheme::for_each_elementary_interval(
    unsigned n, const std::function<void(const Interval&)>& fn) const {
  const Rational L = base_.length();
  const bool unit = base_.lo == 0 && L == 1;
  if (2 * n + 1 <= 62) {
    // Every endpoint is lo + L j / 2^{2n+1} with integer j, so the same
    // recursion runs on the integers j.
    const unsigned e = 2 * n + 1;
    std::vector<std::uint64_t> len(n + 1), step(n + 1);
    len[0] = std::uint64_t{1} << e;
    for (unsigned k = 1; k <= n; ++k) len[k] = (len[k - 1] - (std::uint64_t{1} << (e - 2 * k))) / 2;
    for (unsigned k = 0; k < n; ++k) step[k] = len[k] - len[k + 1];
    // Depth-first over the 2^n leaves, left to right.
    std::vector<std::uint64_t> lo(n + 1, 0);
    const std::uint64_t leaves = std::uint64_t{1} << n;
    for (std::uint64_t path = 0; path < leaves; ++path) {
      // Only the levels below the highest changed bit need recomputing.
      const unsigned from = path == 0 ? 0 : n - 1 - static_cast<unsigned>(63 - __builtin_clzll(path ^ (path - 1)));
      for (unsigned k = from; k < n; ++k) lo[k + 1] = lo[k] + (((path >> (n - 1 - k)) & 1) ? step[k] : 0);
      Rational a = dyadic(lo[n], e), b = dyadic(lo[n] + len[n], e);
      if (!unit) {
        a = base_.lo + L * a;
        b = base_.lo + L * b;
      }
      fn(Interval{std::move(a), std::move(b)});
    }
    return;
  }
  // Depth-first so memory stays O(n).
  std::vector<Rational> len(n + 1);
  len[0] = L;
  for (unsigned k = 1; k <= n; ++k) len[k] = (len[k - 1] - gap_length(k)) / 2;
  std::function<void(const Rational&, unsigned)> visit = [&](const Rational& lo, unsigned k) {
    if (k == n) {
      fn(Interval{lo, lo + len[k]});
      return;
    }
    visit(lo, k + 1);
    visit(lo + len[k] - len[k + 1], k + 1);
  };
  visit(base_.lo, 0);
}

std::vector<Interval> CantorScheme::elementary_intervals(unsigned n) const {
  if (n > 24) throw PreconditionError("refusing to materialize 2^" + std::to_string(n) +
                                      " intervals; use for_each_elementary_interval");
  std::vector<Interval> out;
  out.reserve(std::size_t{1} << n);
  for_each_elementary_interval(n, [&](const Interval& I) { out.push_back(I); });
  return out;
}

bool CantorScheme::membership(const Rational& x, unsigned n) const {
  if (!base_.contains(x)) throw DomainError("membership: x outside the base interval");
  Rational lo = base_.lo, len = base_.length();
  for (unsigned k = 1; k <= n; ++k) {
    const Rational child = (len - gap_length(k)) / 2;
    if (x <= lo + child) {
      len = child;
    } else if (x >= lo + len - child) {
      lo += len - child;
      len = child;
    } else {
      return false;
    }
  }
  return true;
}

bool CantorScheme::membership(double x, unsigned n) const {
  return membership(from_double(x), n);
}

Rational svc_measure(unsigned n) {
  Rational m = 1;
  for (unsigned i = 1; i <= n; ++i) m -= pow2(static_cast<long>(i) - 1) * pow2(-2 * static_cast<long>(i));
  return m;
}

std::vector<CopyPiece> copy_layout(const Interval& block, unsigned depth) {
  const CantorScheme scheme(block);
  std::vector<Rational> len(depth + 1);
  for (unsigned k = 0; k <= depth; ++k) len[k] = scheme.elementary_length(k);
  std::vector<CopyPiece> out;
  std::function<void(const Rational&, unsigned)> visit = [&](const Rational& lo, unsigned k) {
    if (k == depth) {
      out.push_back({Interval{lo, lo + len[k]}, 0});
      return;
    }
    visit(lo, k + 1);
    out.push_back({Interval{lo + len[k + 1], lo + len[k] - len[k + 1]}, k + 1});
    visit(lo + len[k] - len[k + 1], k + 1);
  };
  visit(block.lo, 0);
  return out;
}

FillScheme::FillScheme(unsigned depth, BlockPolicy policy)
    : depth_(depth), policy_(policy ? std::move(policy) : BlockPolicy(&one_block_per_gap)) {
  if (depth_ == 0) throw PreconditionError("fill depth must be at least 1");
  blocks_.emplace_back();
  gaps_.push_back({Interval{Rational(0), Rational(1)}});
}

unsigned FillScheme::dyadic_exponent(const Rational& length) {
  if (sgn(length) <= 0 || length.get_num() != 1 ||
      mpz_popcount(length.get_den().get_mpz_t()) != 1)
    throw InvariantViolation("gap length " + to_string(length) + " is not a power of two");
  return static_cast<unsigned>(mpz_sizeinbase(length.get_den().get_mpz_t(), 2) - 1);
}

unsigned FillScheme::one_block_per_gap(const Interval& gap, unsigned) {
  return dyadic_exponent(gap.length());
}

void FillScheme::build_through(unsigned stage) {
  while (blocks_.size() <= stage) {
    const unsigned n = static_cast<unsigned>(blocks_.size());
    std::vector<Interval> blocks, gaps;
    for (const auto& gap : gaps_[n - 1]) {
      const unsigned e = dyadic_exponent(gap.length());
      const unsigned N = policy_(gap, n);
      if (N < e)
        throw InvariantViolation("block policy chose a block longer than its gap");
      const Rational w = pow2(-static_cast<long>(N));
      for (Rational lo = gap.lo; lo < gap.hi; lo += w) {
        blocks.push_back(Interval{lo, lo + w});
        for (auto& piece : copy_layout(blocks.back(), depth_))
          if (piece.gap_level > 0) gaps.push_back(piece.interval);
      }
    }
    blocks_.push_back(std::move(blocks));
    gaps_.push_back(std::move(gaps));
  }
}

const std::vector<Interval>& FillScheme::blocks(unsigned stage) {
  if (stage == 0) throw PreconditionError("stage numbering starts at 1");
  build_through(stage);
  return blocks_[stage];
}

const std::vector<Interval>& FillScheme::gaps(unsigned stage) {
  build_through(stage);
  return gaps_[stage];
}

Rational FillScheme::fill_measure(unsigned n) {
  if (n == 0) return Rational(0);
  build_through(n);
  Rational total = 0;
  const Rational tail_share = pow2(-static_cast<long>(depth_) - 1);
  for (unsigned j = 1; j <= n; ++j) {
    Rational copies = 0;
    for (const auto& block : blocks_[j]) copies += block.length();
    // Each copy carries half its length; the gaps hidden inside its residues
    // hold a 2^{-(depth+1)} share that later stages fill by halves.
    total += copies / 2 + copies * tail_share * (1 - pow2(-static_cast<long>(n - j)));
  }
  return total;
}

}  // namespace singhom
