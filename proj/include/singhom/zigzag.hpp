#pragma once

// Dyadic zig-zag functions with uniformly small occupation of thin targets.
//
// For a decreasing s_n -> 0 we pick a_m minimal and strictly increasing with
// s_{a_m} <= 2^{-2^{m+1}} and build PL stages phi_0 = 0, phi_1, ... such that
// on every piece P = I ∩ B_i (I an a_m-dyadic interval, B_i a maximal
// interval on which phi_{m-1} stays in one cell J'_i of width 2^{-2^{m-1}})
// phi_m spends exactly lambda(P) / 2^{2^{m-1}} time in every child cell of
// width 2^{-2^m}.

#include <functional>
#include <string>
#include <vector>

#include "singhom/interval_fn.hpp"

namespace singhom {

// s_n described through its base-2 logarithm so that families such as
// 2^{-1.5n} stay comparable exactly.
class SSequence {
 public:
  using Log2Fn = std::function<Rational(unsigned)>;

  SSequence(std::string name, Log2Fn log2_s);

  // "pow2:k" for 2^{-kn}, "pow2:k:c" for 2^{c-kn}, "dexp" for 2^{-2^{n+1}}.
  static SSequence parse(const std::string& family);

  const std::string& name() const { return name_; }
  Rational log2(unsigned n) const { return log2_s_(n); }
  double value(unsigned n) const;
  bool is_rational(unsigned n) const;
  Rational exact(unsigned n) const;

 private:
  std::string name_;
  Log2Fn log2_s_;
};

// a_0 .. a_{count-1}.
std::vector<unsigned> choose_a(const SSequence& s, unsigned count);

struct ZigzagPiece {
  Interval domain;   // I ∩ B_i
  Rational cell_lo;  // J'_i = [cell_lo, cell_lo + 2^{-2^{m-1}}]
  Rational y_left, y_right;  // phi_{m-1} at the ends of the piece
};

// phi_m from phi_{m-1}; `pieces` receives the decomposition when non-null.
PLFunc build_stage(const PLFunc& prev, unsigned m, unsigned a_m,
                   std::vector<ZigzagPiece>* pieces = nullptr);

// Maximal intervals on which f stays in one cell of width 2^{-level}
// (lower cell on ties), with the cell's left end.
std::vector<ZigzagPiece> cell_runs(const PLFunc& f, unsigned level);

class Zigzag {
 public:
  Zigzag(SSequence s, unsigned stages);

  const SSequence& s() const { return s_; }
  unsigned stages() const { return static_cast<unsigned>(phi_.size()) - 1; }
  const PLFunc& stage(unsigned m) const { return phi_.at(m); }
  const PLFunc& top() const { return phi_.back(); }
  const std::vector<ZigzagPiece>& pieces(unsigned m) const { return pieces_.at(m); }

  // Closed-form pushforward of the top stage on I. I must be a union of
  // top-stage pieces (any dyadic interval of level <= a_M is).
  Pushforward top_pushforward(const Interval& I) const;

  unsigned a(unsigned m) const;
  // Largest m with a_m <= n, or -1 when n < a_0.
  int rung(unsigned n) const;
  Rational q(unsigned n) const;

 private:
  SSequence s_;
  mutable std::vector<unsigned> a_;
  std::vector<PLFunc> phi_;
  std::vector<std::vector<ZigzagPiece>> pieces_;
};

inline Rational q_sequence(const Zigzag& z, unsigned n) { return z.q(n); }

struct CoveringReport {
  unsigned n = 0;
  unsigned stage = 0;
  Rational q;
  Rational max_ratio;  // max over I, J of lambda(I ∩ phi^{-1} J) / lambda(I)
  std::uint64_t intervals_checked = 0;
  bool passed = false;
  std::string slack;  // description of the finite-stage argument
};

CoveringReport verify_covering_bound(const Zigzag& z, unsigned M, unsigned n);

struct OscillationRow {
  unsigned n = 0;
  Rational min_oscillation;
  double s_n = 0.0;
  bool certified = false;  // min_oscillation >= s_n
  double counting_bound = 0.0;  // s_n (1/q_n - 1)
  bool counting_ok = false;
};

std::vector<OscillationRow> oscillation_certificate(const Zigzag& z, unsigned M, unsigned n_lo,
                                                    unsigned n_hi);

}  // namespace singhom
