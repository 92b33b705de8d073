#pragma once

// Smith-Volterra-Cantor sets and their iterated fillings.
//
// The level-k removal takes the open middle gap of length (v-u)*4^{-k} out of
// each of the 2^{k-1} level-(k-1) elementary intervals, leaving intervals of
// length (v-u)*b_k with b_k = 2^{-(k+1)} + 2^{-(2k+1)}.

#include <functional>
#include <vector>

#include "singhom/interval_fn.hpp"

namespace singhom {

class CantorScheme {
 public:
  explicit CantorScheme(Interval base = {Rational(0), Rational(1)});

  const Interval& base() const { return base_; }

  // Closed form 2^{-(n+1)} + 2^{-(2n+1)}, with b_0 = 1.
  static Rational b(unsigned n);

  // Level-n elementary length obtained by repeated halving of (parent - gap).
  Rational elementary_length(unsigned n) const;
  Rational gap_length(unsigned k) const;

  std::vector<Interval> elementary_intervals(unsigned n) const;
  void for_each_elementary_interval(unsigned n,
                                    const std::function<void(const Interval&)>& fn) const;

  bool membership(const Rational& x, unsigned n) const;
  bool membership(double x, unsigned n) const;

 private:
  Interval base_;
};

// Measure of the level-n union of the unit scheme, 2^n * b_n.
Rational svc_measure(unsigned n);

// A planted copy with its elementary structure cut off at `depth`: the
// in-order list of pieces, residues (level-depth elementary intervals) and
// removed gaps tagged by level.
struct CopyPiece {
  Interval interval;
  unsigned gap_level = 0;  // 0 marks a residue
};
std::vector<CopyPiece> copy_layout(const Interval& block, unsigned depth);

// Iterated filling K_1 ⊆ K_2 ⊆ ... of [0,1]. Stage n plants a scaled scheme
// in every block of every gap left after stage n-1. Gaps inside residues are
// not enumerated; their mass is tracked in closed form.
class FillScheme {
 public:
  // Returns the exponent N of the block length 2^{-N} used to tile `gap`
  // at stage `stage`. N must make 2^{-N} divide the gap length.
  using BlockPolicy = std::function<unsigned(const Interval& gap, unsigned stage)>;

  explicit FillScheme(unsigned depth = 2, BlockPolicy policy = {});

  unsigned depth() const { return depth_; }

  // Blocks planted at `stage` (stage >= 1), left to right.
  const std::vector<Interval>& blocks(unsigned stage);
  // Enumerated gaps of K_stage, left to right (gaps(0) is [0,1]).
  const std::vector<Interval>& gaps(unsigned stage);

  Rational fill_measure(unsigned n);

  static unsigned one_block_per_gap(const Interval& gap, unsigned stage);
  static unsigned dyadic_exponent(const Rational& length);

 private:
  void build_through(unsigned stage);

  unsigned depth_;
  BlockPolicy policy_;
  std::vector<std::vector<Interval>> blocks_;  // index = stage
  std::vector<std::vector<Interval>> gaps_;    // index = stage
};

}  // namespace singhom
