#include <cmath>

#include "doctest.h"
#include "singhom/serialize.hpp"

using namespace singhom;

TEST_SUITE("serialize") {
  TEST_CASE("expression documents round-trip byte for byte") {
    const char* exprs[] = {
        "identity(3)",
        "powermap(1.5, 2)",
        "product(id, pl((0,0),(1/3,1/2),(1,1)))",
        "slide(phi=triwave(slope=6, amp=1/16), delta=1/8)",
        "slide(phi=zigzag(pow2:3, stages=2, scale=1/4), delta=1/4, delta_hi=1/2, d=3)",
        "inverse(product(singular(stage=2), id)) o powermap(2, 2)",
        "expand(center=(1/2, 1/2), r=1/5, eta=1/20)",
        "twist(s=pow2:3, eps=1/4, stages=3)",
    };
    for (const char* text : exprs) {
      CAPTURE(text);
      const HomeoExpr e = parse_expr(text);
      const std::string first = dump(to_json(e));
      const std::string second = dump(to_json(homeo_from_json(json::parse(first))));
      CHECK(first == second);
    }
  }

  TEST_CASE("composition is right-associative") {
    const HomeoExpr e = parse_expr("powermap(2) o powermap(3/2) o powermap(5/4)");
    CHECK(e.kind() == "compose");
    CHECK(e.eval({0.5})[0] == doctest::Approx(std::pow(std::pow(std::pow(0.5, 1.25), 1.5), 2.0)));
  }

  TEST_CASE("rationals serialise canonically") {
    CHECK(rational_json(Rational(3, 4)) == json("3/4"));
    CHECK(rational_from_json(json("2/4")) == Rational(1, 2));
    CHECK(rational_from_json(json(3)) == 3);
  }

  TEST_CASE("PL literals and helpers") {
    const PLFunc w = triangle_wave(Rational(4), Rational(1, 4));
    CHECK(w.max_value() == Rational(1, 4));
    CHECK(w.min_value() == Rational(-1, 4));
    CHECK(w.eval(Rational(0)) == 0);
    const PLFunc c = clamp_pl(w, Rational(-1, 8), Rational(1, 8));
    CHECK(c.max_value() == Rational(1, 8));
    CHECK(c.eval(Rational(1, 32)) == Rational(1, 8));
    CHECK(plfunc_from_json(to_json(c)) == c);
  }

  TEST_CASE("malformed input is rejected") {
    CHECK_THROWS_AS(parse_expr("identity("), ParseError);
    CHECK_THROWS_AS(parse_expr("rotate(2)"), ParseError);
    CHECK_THROWS_AS(parse_pl("pl((0,0),(1,1)"), ParseError);
    CHECK_THROWS_AS(homeo_from_json(json::parse(R"({"type":"warp"})")), ParseError);
    CHECK_THROWS(parse_pl("pl((0,0),(1/2,1),(1/2,1),(1,1))"));
  }

  TEST_CASE("git blob ids") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  }
}
