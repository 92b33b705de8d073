#pragma once

// Concrete homeomorphisms built from the 1-D and d-D primitives: the
// strongly singular Cantor-filling maps, prevalence witnesses and the
// nowhere-differentiable radial twist.

#include <cstdint>
#include <optional>
#include <vector>

#include "singhom/cantor.hpp"
#include "singhom/homeo.hpp"
#include "singhom/zigzag.hpp"

namespace singhom {

// Stagewise construction f_0 = id, f_1, f_2, ... Each affine gap piece of
// f_{n-1} is tiled by dyadic blocks whose images have length <= 2^{-n}; every
// block carries a Cantor copy whose level-k elementary intervals (k <= depth)
// get images of length min(diam^p, parent image / 3). Residues at level
// `depth` and removed gaps stay affine.
class StronglySingular {
 public:
  struct ElementaryRecord {
    unsigned level;
    Interval domain;
    Rational image_length;
  };
  struct Copy {
    unsigned stage;
    Interval block;
    std::vector<ElementaryRecord> elementary;
  };

  explicit StronglySingular(unsigned p = 3, unsigned depth = 2, bool keep_records = false);

  unsigned p() const { return p_; }
  unsigned depth() const { return depth_; }

  const PLFunc& stage(unsigned m);
  // Pieces of stage(m) that are still gaps of K_m.
  const std::vector<bool>& gap_flags(unsigned m);
  const std::vector<Copy>& copies(unsigned m);
  // Lebesgue measure of the gap pieces of stage m (these are what stage m+1 fills).
  Rational enumerated_gap_measure(unsigned m);

 private:
  void build_through(unsigned m);

  unsigned p_, depth_;
  bool keep_records_;
  std::vector<PLFunc> f_;
  std::vector<std::vector<bool>> gap_;
  std::vector<std::vector<Copy>> copies_;
};

PLFunc strongly_singular_1d(unsigned m, unsigned p = 3, unsigned depth = 2);

struct WitnessSample {
  Point s, t;
  HomeoExpr expr;
  std::uint64_t seed = 0;
};

// psi_s ∘ f0 ∘ psi_t with s, t uniform on [1,2]^d drawn from SplitMix64(seed):
// s_1..s_d first, then t_1..t_d.
WitnessSample sample_witness(const HomeoExpr& f0, std::uint64_t seed);
WitnessSample witness_with(const HomeoExpr& f0, Point s, Point t);

// The twist of the nowhere-differentiability argument.
struct NowhereTwist {
  HomeoExpr expr;
  PLFunc h, phi;
  unsigned N = 0;      // first certified scale
  unsigned n_hi = 0;   // last scale with an h node
  unsigned h_nodes_from = 0;
  Rational eps;
  std::vector<OscillationRow> oscillation;  // of phi, against 4 sqrt(s_n)
};

// s: the modulus sequence; eps: closeness to the identity; stages: zig-zag
// stages for phi (scaled into [0, eps]); span: how many scales past N to
// certify.
NowhereTwist build_nowhere_twist(const SSequence& s, const Rational& eps, unsigned stages,
                                 int d, unsigned span = 5);

// eta for radial_expand so that the image of the ball has volume >= 1 - eps:
// the complement lands in an eta-collar of the boundary, of volume <= 2 d eta.
double expand_eta_for(double eps, int d);

}  // namespace singhom
