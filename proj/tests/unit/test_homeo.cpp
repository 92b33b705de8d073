
#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "singhom/constructions.hpp"
#include "singhom/homeo.hpp"
#include "singhom/rng.hpp"

using namespace singhom;

namespace {

std::vector<HomeoExpr> corpus() {
  SplitMix64 rng(3);
  const PLFunc f = testing_support::random_homeo(rng, 6);
  const PLFunc g = testing_support::random_homeo(rng, 9);
  const PLFunc phi({Rational(0), Rational(1, 3), Rational(1)}, {Rational(0), Rational(1, 10), Rational(-1, 20)});
  std::vector<HomeoExpr> out{
      HomeoExpr::identity(2),
      HomeoExpr::product({f, g}),
      HomeoExpr::power_map({1.5, 1.25, 2.0}),
      HomeoExpr::slide(phi, Rational(1, 4), 2),
      HomeoExpr::slide(phi, Rational(1, 8), Rational(1, 4), 3),
      HomeoExpr::radial_twist(f, phi, 2),
      HomeoExpr::radial_expand({0.5, 0.5}, 0.2, 0.05),
  };
  out.push_back(HomeoExpr::compose(out[3], out[1]));
  out.push_back(HomeoExpr::inverse(out[7]));
  out.push_back(HomeoExpr::compose(out[5], HomeoExpr::compose(out[6], out[1])));
  return out;
}

}  // namespace

TEST_SUITE("homeo") {
  TEST_CASE("round trip on every node kind") {
    for (const HomeoExpr& e : corpus()) {
      INFO(e.kind());
      CHECK(roundtrip_error(e, 2000, 5) < 1e-10);
    }
  }

  TEST_CASE("images stay in the cube and boxes are enclosed") {
    SplitMix64 rng(9);
    for (const HomeoExpr& e : corpus()) {
      const int d = e.dim();
      for (int trial = 0; trial < 20; ++trial) {
        Box b{Point(d), Point(d)};
        for (int i = 0; i < d; ++i) {
          const double a = rng.uniform(), c = rng.uniform();
          b.lo[i] = std::min(a, c);
          b.hi[i] = std::max(a, c);
        }
        const Enclosure enc = e.enclose(b);
        for (int k = 0; k < 10; ++k) {
          Point x(d);
          for (int i = 0; i < d; ++i) x[i] = rng.uniform(b.lo[i], b.hi[i]);
          const Point y = e.eval(x);
          for (int i = 0; i < d; ++i) {
            CHECK(y[i] >= 0.0);
            CHECK(y[i] <= 1.0);
            if (enc.certified) {
              CHECK(y[i] >= enc.box.lo[i] - 1e-12);
              CHECK(y[i] <= enc.box.hi[i] + 1e-12);
            }
          }
        }
      }
    }
  }

  TEST_CASE("disc chart round trip") {
    SplitMix64 rng(1);
    for (int k = 0; k < 1000; ++k) {
      const Point x{rng.uniform(), rng.uniform(), rng.uniform()};
      const Point t = chart::to_cylinder(x);
      CHECK(std::hypot(t[0], t[1]) <= 1.0 + 1e-15);
      const Point y = chart::from_cylinder(t);
      for (int i = 0; i < 3; ++i) CHECK(std::abs(x[i] - y[i]) < 1e-13);
    }
  }

  TEST_CASE("slide taper pieces invert each other") {
    for (double y1 : {0.0, 0.05, 0.3, 0.9, 1.0})
      for (double phi : {-0.05, 0.0, 0.07}) {
        const double z = slide_forward(y1, phi, 0.125, 0.25);
        CHECK(std::abs(slide_backward(z, phi, 0.125, 0.25) - y1) < 1e-15);
      }
  }

  TEST_CASE("construction preconditions") {
    const PLFunc big({Rational(0), Rational(1)}, {Rational(1, 2), Rational(1, 2)});
    CHECK_THROWS_AS(HomeoExpr::slide(big, Rational(1, 4), 2), InvariantViolation);
    CHECK_THROWS_AS(HomeoExpr::slide(PLFunc::constant(0), Rational(1, 4), 1), PreconditionError);
    CHECK_THROWS_AS(HomeoExpr::power_map({3.0}), InvariantViolation);
    CHECK_THROWS_AS(HomeoExpr::compose(HomeoExpr::identity(2), HomeoExpr::identity(3)), PreconditionError);
    CHECK_THROWS_AS(HomeoExpr::radial_expand({0.1, 0.5}, 0.2, 0.01), DomainError);
    CHECK_THROWS_AS(HomeoExpr::identity(2).eval({0.5}), DomainError);
  }

  TEST_CASE("boundary fixing") {
    // Power maps keep each face but slide points along it.
    CHECK(boundary_displacement(HomeoExpr::power_map({1.5, 2.0})) > 0.0);
    CHECK(boundary_displacement(HomeoExpr::identity(3)) == 0.0);
    const PLFunc phi({Rational(0), Rational(1, 2), Rational(1)}, {Rational(0), Rational(1, 10), Rational(0)});
    CHECK(boundary_displacement(HomeoExpr::slide(phi, Rational(1, 4), 2)) == 0.0);
  }
}

TEST_SUITE("homeo") {
  TEST_CASE("round trip error is bounded by the conditioning of the flattest piece") {
    // Rounding f(x) to a double costs about one ulp, which the inverse
    // divides by the smallest slope.
    for (unsigned m = 1; m <= 4; ++m) {
      const PLFunc f = strongly_singular_1d(m);
      double min_slope = 1;
      for (std::size_t i = 0; i + 1 < f.size(); ++i)
        min_slope = std::min(min_slope, to_double((f.ys()[i + 1] - f.ys()[i]) / (f.xs()[i + 1] - f.xs()[i])));
      const double err = roundtrip_error(HomeoExpr::product({f}), 10000, 1);
      CAPTURE(m);
      CHECK(err <= 4 * std::numeric_limits<double>::epsilon() / min_slope);
      if (m <= 2) CHECK(err < 1e-10);
    }
  }
}
