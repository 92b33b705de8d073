#pragma once

// Estimators for graph length and area, Hausdorff-measure bounds,
// pushforward singularity, difference quotients and local volume ratios.
//
// Norm conventions. Dyadic boxes are sup-norm cubes. Where a Euclidean
// figure is also reported, the box of side a in R^k is taken to have
// diameter a*sqrt(k).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "singhom/homeo.hpp"
#include "singhom/interval_fn.hpp"

namespace singhom {

// Axis box with exact corners, used as the domain Q of graph estimators.
struct RBox {
  std::vector<Rational> lo, hi;

  static RBox unit(int d);
  int dim() const { return static_cast<int>(lo.size()); }
  Rational volume() const;
  Box to_double() const;
};

// ---------------------------------------------------------------------------
// Length of one-dimensional graphs.

struct LengthAnalysis {
  unsigned n = 0;
  Rational mesh;                 // max spacing of the partition used
  std::size_t partition_size = 0;
  double ell_n = 0;              // sum of segment lengths
  Rational flat_measure;         // lambda(S_n): pieces with slope <= 1/n
  std::vector<double> deficits;  // w_i = dx + dy - |(dx, dy)|
  double deficit_sum = 0;
  bool near_two = false;         // ell_n >= 2 - 2^{-n}
  Rational flat_bound;           // 1 - (n+1) 2^{-n}
  bool flat_bound_holds = false;
  // (1 - lambda(S_n)) / (n+1) <= 2 - ell_n, which holds for every n.
  bool deficit_inequality = false;
};

// Partition: the breakpoints of f merged with the grid j/(n+1), so the mesh
// is below 1/n and ell_n is the exact length of the graph.
LengthAnalysis length_analysis(const PLFunc& f, unsigned n);

// ---------------------------------------------------------------------------
// Piecewise-affine decomposition and the Area Formula.

// On `box`, e(x) = A x + b with A row-major d x d.
struct AffineCell {
  RBox box;
  std::vector<Rational> A, b;
};

// Cells covering Q for Identity, Product1D, Slide (middle region, or where
// phi is constant), Compose with a diagonal inner map, and Inverse of
// Identity/Product1D. Anything else raises UnsupportedExpression.
std::vector<AffineCell> affine_cells(const HomeoExpr& e, const RBox& Q);

// det(I + A^T A) as the Cauchy-Binet sum of squared d x d minors of [I; A].
Rational gram_determinant(const std::vector<Rational>& A, int d);

struct AreaReport {
  double area = 0;      // sum over cells of sqrt(vol^2 det(I + A^T A))
  Rational lower, upper;  // certified bracket of the same sum
  std::size_t cells = 0;
};

AreaReport graph_area_pa(const HomeoExpr& e, const RBox& Q);

// ---------------------------------------------------------------------------
// Upper bound from a dyadic cover of the graph.

struct CoverRow {
  unsigned k = 0;
  std::uint64_t boxes = 0;  // N(delta) with delta = 2^{-k}
  double value = 0;         // N(delta) (delta sqrt(2d))^d
  double h_delta = 0;       // min of value over this and finer scales: bounds H^d_delta from above
};

struct CoverReport {
  std::vector<CoverRow> rows;
  double upper = 0;  // value at the finest scale
  bool certified = true;  // false when some image enclosure was sampled
};

// Domain cells are the 2^{-k} grid cut to Q; each is pushed through
// HomeoExpr::enclose and the target grid cubes meeting the image box are
// counted.
CoverReport box_cover_upper(const HomeoExpr& e, const RBox& Q, unsigned k_lo, unsigned k_hi);

// ---------------------------------------------------------------------------
// Mass-distribution lower bound for the graph measure mu = lambda|Q o (id, e)^{-1}.

struct MassRow {
  unsigned n = 0;
  double max_mass = 0;
  std::optional<Rational> max_mass_exact;
  double stderr_max = 0;      // MC only
  int d = 0;
  double lower_sup = 0;       // mu(T) 2^{-nd} / max_mass, this scale alone
  double lower_euclid = 0;    // mu(T) (2^{-n} sqrt(2d))^d / max_mass, this scale alone
  double lower_valid = 0;     // sup-norm bound for all sets below 2^{-n}, covering constant 8^d included
  std::optional<Rational> q;  // bound factor checked at this scale
  bool bound_ok = true;       // max_mass <= q 2^{-nd}
};

struct MassReport {
  std::string mode;  // "exact-cells", "slide-density" or "monte-carlo"
  std::string norm = "sup";
  Rational total_mass;
  std::vector<MassRow> rows;
  double lower = 0;  // best lower_valid over the scales
  unsigned best_scale = 0;
  unsigned violations = 0;
};

struct MassOptions {
  // Pushforward of phi restricted to a dyadic interval. Only used on the
  // slide path; defaults to the generic PL pushforward of the slide's phi.
  std::function<Pushforward(const Interval&)> density;
  // q_n of the box bound mu(Q1 x Q2) <= q_n 2^{-nd}; when set, every scale is checked.
  std::function<Rational(unsigned)> q;
  std::size_t mc_samples = 1000000;
  std::uint64_t seed = 0;
  bool allow_mc = true;
};

MassReport mass_distribution_lower(const HomeoExpr& e, const RBox& Q, unsigned n_lo,
                                   unsigned n_hi, const MassOptions& opt = {});

// ---------------------------------------------------------------------------
// Pushforward histograms.

struct OccupationHist {
  unsigned k = 0;
  int d = 0;
  bool exact = false;
  // Row-major over the d-dimensional grid of side 2^{-k}, coordinate 1 fastest.
  std::vector<double> mass;
  std::vector<Rational> exact_mass;  // filled on the rational path
  double stderr_max = 0;             // MC only

  std::size_t cells() const { return mass.size(); }
};

struct HistOptions {
  std::size_t mc_samples = 1000000;
  std::uint64_t seed = 0;
};

// Exact for separable expressions built from Identity, Product1D, PowerMap,
// Compose and Inverse (rational when no PowerMap is involved, double
// otherwise); Monte Carlo for everything else.
OccupationHist pushforward_hist(const HomeoExpr& e, unsigned k, const HistOptions& opt = {});

// Per-coordinate cell masses of a separable expression, or nullopt.
std::optional<std::vector<std::vector<double>>> separable_marginals(const HomeoExpr& e, unsigned k);

// Lebesgue measure of the fewest cells carrying at least 1 - eps of the mass.
double singularity_score(const OccupationHist& h, double eps);

// ---------------------------------------------------------------------------
// Pointwise diagnostics.

struct LocalRatio {
  double ratio = 0;         // lambda(e(B)) / lambda(B), B the sup-norm box
  double ball_factor = 0;   // lambda(box) / lambda(Euclidean ball) for the same radius
  bool exact = true;
  double stderr_ = 0;
};

// B = prod [x_i - r, x_i + r] cut to the cube.
LocalRatio local_ratio(const HomeoExpr& e, const Point& x, double r, std::size_t mc_samples = 200000,
                       std::uint64_t seed = 0);

enum class ProbeFrame { Cube, Cylinder };

struct ProfileRow {
  unsigned n = 0;
  double quotient = 0;  // max over probes at scale 2^{-n}
  double distance = 0;  // |x - y| of the maximizing probe
};

// Cube frame: probes x +- (j/4) 2^{-n} along the axes and diagonals.
// Cylinder frame: probes at radius r +- j 2^{-n}/8 with the same angle (and
// (2^{-n}, alpha) on the axis); distances are measured in the disc chart.
std::vector<ProfileRow> diff_quotient_profile(const HomeoExpr& e, const Point& x, unsigned n_lo,
                                              unsigned n_hi, ProbeFrame frame = ProbeFrame::Cube);

struct OntoReport {
  bool vacuous = false;  // alpha >= beta
  std::size_t samples = 0;
  double max_residual = 0;      // |e(x) - y|_inf after the iteration
  double max_displacement = 0;  // spot check of |e - id| on B(c, beta)
  bool precondition_ok = true;
  unsigned max_iterations = 0;
  std::vector<Point> counterexamples;
};

// Solves e(x) = y for sampled y in B(c, beta - alpha) with the damped
// iteration x <- x - damping (e(x) - y).
OntoReport onto_check(const HomeoExpr& e, const Point& c, double alpha, double beta,
                      std::size_t samples, std::uint64_t seed, double damping = 1.0);

}  // namespace singhom
