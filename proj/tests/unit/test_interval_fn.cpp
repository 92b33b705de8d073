#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "singhom/interval_fn.hpp"

using namespace singhom;

namespace {
PLFunc tent() { return PLFunc({Rational(0), Rational(1, 2), Rational(1)}, {Rational(0), Rational(1), Rational(0)}); }
}  // namespace

TEST_SUITE("interval_fn") {
  TEST_CASE("constructor rejects malformed breakpoints") {
    CHECK_THROWS_AS(PLFunc({Rational(0), Rational(0), Rational(1)}, {Rational(0), Rational(1, 2), Rational(1)}),
                    InvariantViolation);
    CHECK_THROWS_AS(PLFunc({Rational(0), Rational(1, 2)}, {Rational(0), Rational(1)}), InvariantViolation);
  }

  TEST_CASE("dyadic intervals") {
    const DyadicInterval I(3, 5);
    CHECK(I.lo() == Rational(5, 8));
    CHECK(I.hi() == Rational(3, 4));
    CHECK(I.length() == Rational(1, 8));
  }

  TEST_CASE("evaluation, inverse and composition") {
    const PLFunc f({Rational(0), Rational(1, 4), Rational(1)}, {Rational(0), Rational(1, 2), Rational(1)});
    CHECK(f.monotone_homeo());
    CHECK(f.eval(Rational(1, 8)) == Rational(1, 4));
    CHECK(f.inverse_eval(Rational(3, 4)) == Rational(5, 8));
    CHECK(f.eval(0.125) == 0.25);
    const PLFunc g = inverse(f);
    for (const PLFunc& h : {compose(f, g), compose(g, f)})
      for (const Rational& x : h.xs()) CHECK(h.eval(x) == x);
    CHECK_FALSE(tent().monotone_homeo());
    CHECK_THROWS_AS(tent().inverse_eval(Rational(1, 2)), InvariantViolation);
    CHECK_THROWS_AS(f.eval(Rational(2)), DomainError);
  }

  TEST_CASE("oscillation, preimages and sup distance") {
    CHECK(oscillation(tent(), {Rational(1, 4), Rational(3, 4)}) == Rational(1, 2));
    CHECK(preimage_measure(tent(), {Rational(1, 2), Rational(1)}) == Rational(1, 2));
    CHECK(preimage_measure(tent(), {Rational(0), Rational(1, 2)}, {Rational(0), Rational(1, 2)}) == Rational(1, 4));
    CHECK(sup_distance(tent(), PLFunc::constant(0)) == 1);
  }

  TEST_CASE("pushforward of a PL map") {
    const Pushforward nu = pushforward(tent(), {Rational(0), Rational(1)});
    CHECK(nu.mass(Rational(0), Rational(1)) == 1);
    CHECK(nu.mass(Rational(0), Rational(1, 2)) == Rational(1, 2));
    const Pushforward flat = pushforward(PLFunc::constant(Rational(1, 3)), {Rational(0), Rational(1, 2)});
    REQUIRE(flat.atoms.size() == 1);
    CHECK(flat.mass(Rational(1, 4), Rational(1, 2)) == Rational(1, 2));
    CHECK(nu.scaled(Rational(1, 4)).mass(Rational(0), Rational(1, 8)) == Rational(1, 2));
  }

  TEST_CASE("increments of a monotone homeomorphism sum to 2 on any partition") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const PLFunc f = testing_support::random_homeo(rng, 7);
      std::vector<Rational> part{Rational(0)};
      for (int j = 1; j < 9; ++j) part.push_back(Rational(j, 9)), part.back().canonicalize();
      part.push_back(Rational(1));
      CHECK(partition_increment_sum(f, part) == 2);
      CHECK(polyline_length(f) <= 2.0);
      CHECK(polyline_length(f) >= std::sqrt(2.0) - 1e-15);
    }
  }
}
