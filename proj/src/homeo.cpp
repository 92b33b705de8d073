#include "singhom/homeo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "overloaded.hpp"
#include "singhom/rng.hpp"

namespace singhom {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void require_in_cube(const Point& x, int d) {
  if (static_cast<int>(x.size()) != d)
    throw DomainError("point has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(d));
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("point outside [0,1]^d");
}

// Distance from `c` to the cube boundary along unit direction `u`.
double exit_distance(const Point& c, const Point& u) {
  double R = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (u[i] > 0) R = std::min(R, (1.0 - c[i]) / u[i]);
    if (u[i] < 0) R = std::min(R, -c[i] / u[i]);
  }
  return R;
}

Point expand_forward(const RadialExpandNode& n, const Point& x, bool invert) {
  const std::size_t d = x.size();
  Point v(d);
  double rho = 0;
  for (std::size_t i = 0; i < d; ++i) {
    v[i] = x[i] - n.center[i];
    rho += v[i] * v[i];
  }
  rho = std::sqrt(rho);
  if (rho == 0.0) return x;
  Point u(d);
  for (std::size_t i = 0; i < d; ++i) u[i] = v[i] / rho;
  const double R = exit_distance(n.center, u);
  const double eta = std::min(n.eta, R - n.r);
  const double knee = R - eta;  // image radius of the sphere of radius r
  double out;
  if (!invert) {
    out = rho <= n.r ? rho * knee / n.r : knee + (rho - n.r) * eta / (R - n.r);
  } else {
    out = rho <= knee ? rho * n.r / knee : n.r + (rho - knee) * (R - n.r) / eta;
  }
  Point y(d);
  for (std::size_t i = 0; i < d; ++i) y[i] = clamp01(n.center[i] + u[i] * out);
  return y;
}

Point twist_apply(const RadialTwistNode& n, const Point& x, bool invert) {
  Point t = chart::to_cylinder(x);
  const double r = std::min(1.0, std::hypot(t[0], t[1]));
  if (r == 0.0) return x;
  const double alpha = std::atan2(t[1], t[0]);
  double r2, a2;
  if (!invert) {
    r2 = n.h->eval(r);
    a2 = alpha + n.phi->eval(r);
  } else {
    r2 = n.h->inverse_eval(r);
    a2 = alpha - n.phi->eval(r2);
  }
  t[0] = r2 * std::cos(a2);
  t[1] = r2 * std::sin(a2);
  return chart::from_cylinder(t);
}

Enclosure sampled_enclosure(const HomeoExpr& e, const Box& b) {
  const int d = b.dim();
  const int per = d <= 2 ? 7 : (d == 3 ? 5 : 3);
  std::vector<int> idx(d, 0);
  std::vector<Point> images;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= per;
  images.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    Point x(d);
    for (int i = 0; i < d; ++i) {
      const int j = static_cast<int>(rem % per);
      rem /= per;
      x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * j / (per - 1);
    }
    images.push_back(e.eval(x));
  }
  Enclosure out{Box{images[0], images[0]}, false};
  double modulus = 0;
  for (std::size_t k = 0; k < total; ++k) {
    for (int i = 0; i < d; ++i) {
      out.box.lo[i] = std::min(out.box.lo[i], images[k][i]);
      out.box.hi[i] = std::max(out.box.hi[i], images[k][i]);
    }
    // Neighbours along each grid axis.
    std::size_t stride = 1;
    std::size_t rem = k;
    for (int i = 0; i < d; ++i) {
      const std::size_t j = rem % per;
      rem /= per;
      if (j + 1 < static_cast<std::size_t>(per)) {
        const Point& q = images[k + stride];
        for (int c = 0; c < d; ++c) modulus = std::max(modulus, std::abs(q[c] - images[k][c]));
      }
      stride *= per;
    }
  }
  for (int i = 0; i < d; ++i) {
    out.box.lo[i] = clamp01(out.box.lo[i] - 2 * modulus);
    out.box.hi[i] = clamp01(out.box.hi[i] + 2 * modulus);
  }
  return out;
}

// Range of phi over [a, b], in doubles.
std::pair<double, double> phi_range(const PLFunc& phi, double a, double b) {
  double lo = std::min(phi.eval(a), phi.eval(b)), hi = std::max(phi.eval(a), phi.eval(b));
  const auto& xd = phi.xs_double();
  const auto& yd = phi.ys_double();
  auto it = std::upper_bound(xd.begin(), xd.end(), a);
  for (std::size_t i = static_cast<std::size_t>(it - xd.begin()); i < xd.size() && xd[i] < b; ++i) {
    lo = std::min(lo, yd[i]);
    hi = std::max(hi, yd[i]);
  }
  return {lo, hi};
}

}  // namespace

namespace chart {

Point to_cylinder(const Point& x) {
  if (x.size() < 2) throw DomainError("the disc chart needs d >= 2");
  Point t(x);
  const double u1 = 2 * x[0] - 1, u2 = 2 * x[1] - 1;
  const double rho = std::max(std::abs(u1), std::abs(u2));
  if (rho == 0.0) {
    t[0] = t[1] = 0.0;
    return t;
  }
  const double scale = rho / std::hypot(u1, u2);
  t[0] = u1 * scale;
  t[1] = u2 * scale;
  return t;
}

Point from_cylinder(const Point& t) {
  Point x(t);
  const double r = std::hypot(t[0], t[1]);
  if (r == 0.0) {
    x[0] = x[1] = 0.5;
    return x;
  }
  const double scale = r / std::max(std::abs(t[0]), std::abs(t[1]));
  x[0] = clamp01((t[0] * scale + 1) / 2);
  x[1] = clamp01((t[1] * scale + 1) / 2);
  return x;
}

}  // namespace chart

double slide_forward(double y1, double phi, double dlo, double dhi) {
  if (y1 <= dlo) return y1 * (1 + phi / dlo);
  if (y1 >= 1 - dhi) return y1 + phi * (1 - y1) / dhi;
  return y1 + phi;
}

double slide_backward(double z1, double phi, double dlo, double dhi) {
  if (z1 <= dlo + phi) return z1 / (1 + phi / dlo);
  if (z1 >= 1 - dhi + phi) {
    const double k = phi / dhi;
    return (z1 - k) / (1 - k);
  }
  return z1 - phi;
}

HomeoExpr HomeoExpr::identity(int d) {
  if (d < 1) throw PreconditionError("dimension must be positive");
  return HomeoExpr(std::make_shared<Node>(Node{IdentityNode{d}}), d);
}

HomeoExpr HomeoExpr::product(std::vector<PLFunc> fs) {
  std::vector<std::shared_ptr<const PLFunc>> ptrs;
  for (auto& f : fs) ptrs.push_back(std::make_shared<const PLFunc>(std::move(f)));
  return product(std::move(ptrs));
}

HomeoExpr HomeoExpr::product(std::vector<std::shared_ptr<const PLFunc>> fs) {
  if (fs.empty()) throw PreconditionError("Product1D needs at least one factor");
  for (const auto& f : fs)
    if (!f->monotone_homeo())
      throw InvariantViolation("Product1D factors must be monotone homeomorphisms");
  const int d = static_cast<int>(fs.size());
  return HomeoExpr(std::make_shared<Node>(Node{Product1DNode{std::move(fs)}}), d);
}

HomeoExpr HomeoExpr::power_map(Point s) {
  if (s.empty()) throw PreconditionError("PowerMap needs at least one exponent");
  for (double v : s)
    if (!(v >= 1.0 && v <= 2.0)) throw InvariantViolation("PowerMap exponents must lie in [1,2]");
  const int d = static_cast<int>(s.size());
  return HomeoExpr(std::make_shared<Node>(Node{PowerMapNode{std::move(s)}}), d);
}

HomeoExpr HomeoExpr::slide(PLFunc phi, const Rational& delta, int d) {
  if (!(delta < Rational(1, 2)))
    throw InvariantViolation("slide requires delta < 1/2");
  return slide(std::move(phi), delta, delta, d);
}

HomeoExpr HomeoExpr::slide(PLFunc phi, const Rational& delta_lo, const Rational& delta_hi, int d) {
  if (d < 2) throw PreconditionError("a slide needs d >= 2");
  if (sgn(delta_lo) <= 0 || sgn(delta_hi) <= 0 || delta_lo + delta_hi > 1)
    throw InvariantViolation("slide tapers must be positive with delta_lo + delta_hi <= 1");
  if (!(phi.min_value() > -delta_lo) || !(phi.max_value() < delta_hi)) {
    std::ostringstream msg;
    msg << "slide requires -delta_lo < phi < delta_hi (phi range [" << to_string(phi.min_value())
        << ", " << to_string(phi.max_value()) << "], tapers " << to_string(delta_lo) << ", "
        << to_string(delta_hi) << ")";
    throw InvariantViolation(msg.str());
  }
  auto node = std::make_shared<Node>(
      Node{SlideNode{std::make_shared<const PLFunc>(std::move(phi)), delta_lo, delta_hi, d}});
  return HomeoExpr(std::move(node), d);
}

HomeoExpr HomeoExpr::radial_twist(PLFunc h, PLFunc phi, int d) {
  if (d < 2) throw PreconditionError("a radial twist needs d >= 2");
  if (!h.monotone_homeo())
    throw InvariantViolation("radial twist profile h must be a monotone homeomorphism with h(0) = 0");
  auto node = std::make_shared<Node>(Node{RadialTwistNode{
      std::make_shared<const PLFunc>(std::move(h)), std::make_shared<const PLFunc>(std::move(phi)), d}});
  return HomeoExpr(std::move(node), d);
}

HomeoExpr HomeoExpr::radial_expand(Point center, double r, double eta) {
  const int d = static_cast<int>(center.size());
  if (d < 1) throw PreconditionError("radial expand needs a center");
  if (!(r > 0) || !(eta > 0)) throw PreconditionError("radial expand needs r > 0 and eta > 0");
  for (double c : center)
    if (!(c - r > 0.0 && c + r < 1.0)) throw DomainError("ball B(center, r) escapes the open cube");
  return HomeoExpr(std::make_shared<Node>(Node{RadialExpandNode{std::move(center), r, eta}}), d);
}

HomeoExpr HomeoExpr::compose(HomeoExpr outer, HomeoExpr inner) {
  if (outer.dim() != inner.dim()) throw PreconditionError("compose: dimension mismatch");
  const int d = outer.dim();
  return HomeoExpr(std::make_shared<Node>(Node{ComposeNode{std::move(outer), std::move(inner)}}), d);
}

HomeoExpr HomeoExpr::inverse(HomeoExpr e) {
  const int d = e.dim();
  return HomeoExpr(std::make_shared<Node>(Node{InverseNode{std::move(e)}}), d);
}

std::size_t HomeoExpr::depth() const {
  return std::visit(overloaded{
                        [](const ComposeNode& n) { return 1 + std::max(n.outer.depth(), n.inner.depth()); },
                        [](const InverseNode& n) { return 1 + n.inner.depth(); },
                        [](const auto&) -> std::size_t { return 1; },
                    },
                    node_->v);
}

std::string HomeoExpr::kind() const {
  return std::visit(overloaded{
                        [](const IdentityNode&) { return std::string("identity"); },
                        [](const Product1DNode&) { return std::string("product"); },
                        [](const PowerMapNode&) { return std::string("powermap"); },
                        [](const SlideNode&) { return std::string("slide"); },
                        [](const RadialTwistNode&) { return std::string("twist"); },
                        [](const RadialExpandNode&) { return std::string("expand"); },
                        [](const ComposeNode&) { return std::string("compose"); },
                        [](const InverseNode&) { return std::string("inverse"); },
                    },
                    node_->v);
}

Point HomeoExpr::eval(const Point& x) const {
  require_in_cube(x, dim_);
  return std::visit(
      overloaded{
          [&](const IdentityNode&) { return x; },
          [&](const Product1DNode& n) {
            Point y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = n.f[i]->eval(x[i]);
            return y;
          },
          [&](const PowerMapNode& n) {
            Point y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::pow(x[i], n.s[i]);
            return y;
          },
          [&](const SlideNode& n) {
            Point y(x);
            y[0] = clamp01(slide_forward(x[0], n.phi->eval(x[1]), to_double(n.delta_lo),
                                         to_double(n.delta_hi)));
            return y;
          },
          [&](const RadialTwistNode& n) { return twist_apply(n, x, false); },
          [&](const RadialExpandNode& n) { return expand_forward(n, x, false); },
          [&](const ComposeNode& n) { return n.outer.eval(n.inner.eval(x)); },
          [&](const InverseNode& n) { return n.inner.inverse_eval(x); },
      },
      node_->v);
}

Point HomeoExpr::inverse_eval(const Point& y) const {
  require_in_cube(y, dim_);
  return std::visit(
      overloaded{
          [&](const IdentityNode&) { return y; },
          [&](const Product1DNode& n) {
            Point x(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) x[i] = n.f[i]->inverse_eval(y[i]);
            return x;
          },
          [&](const PowerMapNode& n) {
            Point x(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::pow(y[i], 1.0 / n.s[i]);
            return x;
          },
          [&](const SlideNode& n) {
            Point x(y);
            x[0] = clamp01(slide_backward(y[0], n.phi->eval(y[1]), to_double(n.delta_lo),
                                          to_double(n.delta_hi)));
            return x;
          },
          [&](const RadialTwistNode& n) { return twist_apply(n, y, true); },
          [&](const RadialExpandNode& n) { return expand_forward(n, y, true); },
          [&](const ComposeNode& n) { return n.inner.inverse_eval(n.outer.inverse_eval(y)); },
          [&](const InverseNode& n) { return n.inner.eval(y); },
      },
      node_->v);
}

Enclosure HomeoExpr::enclose(const Box& b) const {
  return std::visit(
      overloaded{
          [&](const IdentityNode&) { return Enclosure{b, true}; },
          [&](const Product1DNode& n) {
            Enclosure out{b, true};
            for (int i = 0; i < dim_; ++i) {
              out.box.lo[i] = n.f[i]->eval(b.lo[i]);
              out.box.hi[i] = n.f[i]->eval(b.hi[i]);
            }
            return out;
          },
          [&](const PowerMapNode& n) {
            Enclosure out{b, true};
            for (int i = 0; i < dim_; ++i) {
              out.box.lo[i] = std::pow(b.lo[i], n.s[i]);
              out.box.hi[i] = std::pow(b.hi[i], n.s[i]);
            }
            return out;
          },
          [&](const SlideNode& n) {
            // Coordinate 1 is increasing in y1 and in phi in every taper region.
            const auto [plo, phi_hi] = phi_range(*n.phi, b.lo[1], b.hi[1]);
            const double dl = to_double(n.delta_lo), dh = to_double(n.delta_hi);
            Enclosure out{b, true};
            out.box.lo[0] = clamp01(slide_forward(b.lo[0], plo, dl, dh));
            out.box.hi[0] = clamp01(slide_forward(b.hi[0], phi_hi, dl, dh));
            return out;
          },
          [&](const ComposeNode& n) {
            const Enclosure in = n.inner.enclose(b);
            Enclosure out = n.outer.enclose(in.box);
            out.certified = out.certified && in.certified;
            return out;
          },
          [&](const InverseNode& n) {
            return std::visit(
                overloaded{
                    [&](const IdentityNode&) { return Enclosure{b, true}; },
                    [&](const Product1DNode& p) {
                      Enclosure out{b, true};
                      for (int i = 0; i < dim_; ++i) {
                        out.box.lo[i] = p.f[i]->inverse_eval(b.lo[i]);
                        out.box.hi[i] = p.f[i]->inverse_eval(b.hi[i]);
                      }
                      return out;
                    },
                    [&](const PowerMapNode& p) {
                      Enclosure out{b, true};
                      for (int i = 0; i < dim_; ++i) {
                        out.box.lo[i] = std::pow(b.lo[i], 1.0 / p.s[i]);
                        out.box.hi[i] = std::pow(b.hi[i], 1.0 / p.s[i]);
                      }
                      return out;
                    },
                    [&](const SlideNode& s) {
                      // The inverse is increasing in z1 and decreasing in phi.
                      const auto [plo, phi_hi] = phi_range(*s.phi, b.lo[1], b.hi[1]);
                      const double dl = to_double(s.delta_lo), dh = to_double(s.delta_hi);
                      Enclosure out{b, true};
                      out.box.lo[0] = clamp01(slide_backward(b.lo[0], phi_hi, dl, dh));
                      out.box.hi[0] = clamp01(slide_backward(b.hi[0], plo, dl, dh));
                      return out;
                    },
                    [&](const auto&) { return sampled_enclosure(*this, b); },
                },
                n.inner.node().v);
          },
          [&](const auto&) { return sampled_enclosure(*this, b); },
      },
      node_->v);
}

double roundtrip_error(const HomeoExpr& e, std::size_t samples, std::uint64_t seed) {
  SplitMix64 rng(seed);
  double worst = 0;
  Point x(e.dim());
  for (std::size_t k = 0; k < samples; ++k) {
    for (auto& v : x) v = rng.uniform();
    const Point back = e.inverse_eval(e.eval(x));
    for (int i = 0; i < e.dim(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
  }
  return worst;
}

double boundary_displacement(const HomeoExpr& e, unsigned per_axis) {
  const int d = e.dim();
  double worst = 0;
  std::size_t face_points = 1;
  for (int i = 0; i + 1 < d; ++i) face_points *= per_axis;
  for (int axis = 0; axis < d; ++axis) {
    for (int side = 0; side < 2; ++side) {
      for (std::size_t k = 0; k < face_points; ++k) {
        Point x(d);
        std::size_t rem = k;
        for (int i = 0; i < d; ++i) {
          if (i == axis) {
            x[i] = side;
            continue;
          }
          x[i] = static_cast<double>(rem % per_axis) / (per_axis - 1);
          rem /= per_axis;
        }
        const Point y = e.eval(x);
        for (int i = 0; i < d; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
      }
    }
  }
  return worst;
}

}  // namespace singhom
