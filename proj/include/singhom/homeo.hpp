#pragma once

// Composable homeomorphisms of [0,1]^d with closed-form forward and inverse
// evaluation.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "singhom/interval_fn.hpp"

namespace singhom {

using Point = std::vector<double>;

struct Box {
  Point lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
};

struct Enclosure {
  Box box;
  bool certified = true;  // false when obtained from sampling
};

struct Node;

class HomeoExpr {
 public:
  static HomeoExpr identity(int d);
  static HomeoExpr product(std::vector<PLFunc> fs);
  static HomeoExpr product(std::vector<std::shared_ptr<const PLFunc>> fs);
  static HomeoExpr power_map(Point s);
  // Symmetric tapers: one delta for both ends.
  static HomeoExpr slide(PLFunc phi, const Rational& delta, int d);
  static HomeoExpr slide(PLFunc phi, const Rational& delta_lo, const Rational& delta_hi, int d);
  static HomeoExpr radial_twist(PLFunc h, PLFunc phi, int d);
  static HomeoExpr radial_expand(Point center, double r, double eta);
  static HomeoExpr compose(HomeoExpr outer, HomeoExpr inner);
  static HomeoExpr inverse(HomeoExpr e);

  int dim() const { return dim_; }
  const Node& node() const { return *node_; }
  std::size_t depth() const;
  std::string kind() const;

  Point eval(const Point& x) const;
  Point inverse_eval(const Point& y) const;
  Enclosure enclose(const Box& b) const;

 private:
  HomeoExpr(std::shared_ptr<const Node> node, int d) : node_(std::move(node)), dim_(d) {}
  std::shared_ptr<const Node> node_;
  int dim_ = 0;
};

struct IdentityNode {
  int d;
};

struct Product1DNode {
  std::vector<std::shared_ptr<const PLFunc>> f;
};

struct PowerMapNode {
  Point s;
};

// Coordinate 1 moves by phi(coordinate 2), tapered linearly to zero on
// [0, delta_lo] and [1 - delta_hi, 1].
struct SlideNode {
  std::shared_ptr<const PLFunc> phi;
  Rational delta_lo, delta_hi;
  int d;
};

// (r, alpha, y) -> (h(r), alpha + phi(r), y) on the disc-times-cube model,
// transported to the cube through the square-to-disc radial chart.
struct RadialTwistNode {
  std::shared_ptr<const PLFunc> h, phi;
  int d;
};

// Radial map about `center`: B(center, r) is blown up to everything except an
// eta-collar of the boundary, which receives the rest.
struct RadialExpandNode {
  Point center;
  double r, eta;
};

struct ComposeNode {
  HomeoExpr outer, inner;
};

struct InverseNode {
  HomeoExpr inner;
};

struct Node {
  std::variant<IdentityNode, Product1DNode, PowerMapNode, SlideNode, RadialTwistNode,
               RadialExpandNode, ComposeNode, InverseNode>
      v;
};

// The square [-1,1]^2 <-> unit disc chart used by the twist, acting on the
// first two coordinates of the cube (u = 2x - 1).
namespace chart {
// Cube point -> (p1, p2, y...) with (p1, p2) in the closed unit disc.
Point to_cylinder(const Point& x);
Point from_cylinder(const Point& t);
}  // namespace chart

// Slide pieces exposed for estimators.
double slide_forward(double y1, double phi, double dlo, double dhi);
double slide_backward(double z1, double phi, double dlo, double dhi);

// ‖inverse_eval(eval(x)) - x‖_∞ over `samples` seeded uniform points.
double roundtrip_error(const HomeoExpr& e, std::size_t samples, std::uint64_t seed);

// Boundary-fixing check on a grid of boundary points; returns max displacement.
double boundary_displacement(const HomeoExpr& e, unsigned per_axis = 9);

}  // namespace singhom
