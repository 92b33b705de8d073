#include <cmath>

#include "doctest.h"
#include "singhom/rational.hpp"

using namespace singhom;

TEST_SUITE("rational") {
  TEST_CASE("parse and print round trip") {
    CHECK(to_string(parse_rational("3/8")) == "3/8");
    CHECK(to_string(parse_rational("6/16")) == "3/8");
    CHECK(to_string(parse_rational("0.25")) == "1/4");
    CHECK(to_string(parse_rational("-2")) == "-2");
    CHECK_THROWS_AS(parse_rational("abc"), ParseError);
    CHECK_THROWS_AS(parse_rational("1/0"), ParseError);
  }

  TEST_CASE("powers of two are exact for both signs") {
    CHECK(pow2(10) == 1024);
    CHECK(pow2(-3) == Rational(1, 8));
    CHECK(floor_log2(Rational(3, 8)) == -2);
    CHECK(floor_log2(Rational(8)) == 3);
  }

  TEST_CASE("double conversion is exact one way and correctly rounded the other") {
    CHECK(from_double(0.1) != Rational(1, 10));
    CHECK(to_double(Rational(1, 10)) == 0.1);
    CHECK(to_double(Rational(1, 3)) == 1.0 / 3.0);
    CHECK(to_double(from_double(std::nextafter(1.0, 2.0))) == std::nextafter(1.0, 2.0));
  }

  TEST_CASE("square-root brackets enclose the true value") {
    const Rational two(2);
    CHECK(sqrt_lower(two) * sqrt_lower(two) <= two);
    CHECK(sqrt_upper(two) * sqrt_upper(two) >= two);
    CHECK(to_double(sqrt_upper(two) - sqrt_lower(two)) < 1e-15);
    CHECK(sqrt_lower(Rational(9, 4)) == Rational(3, 2));
  }
}
