#include "doctest.h"
#include "singhom/cantor.hpp"

using namespace singhom;

TEST_SUITE("cantor") {
  TEST_CASE("elementary lengths follow the closed form") {
    const CantorScheme s;
    for (unsigned n = 0; n <= 12; ++n) CHECK(s.elementary_length(n) == CantorScheme::b(n));
    CHECK(CantorScheme::b(1) == Rational(3, 8));
    CHECK(s.gap_length(1) == Rational(1, 4));
  }

  TEST_CASE("level-n union measure and the limit 1/2") {
    const CantorScheme s;
    for (unsigned n = 0; n <= 10; ++n) {
      Rational total = 0;
      s.for_each_elementary_interval(n, [&](const Interval& I) { total += I.length(); });
      CHECK(total == svc_measure(n));
      CHECK(svc_measure(n) - Rational(1, 2) == pow2(-static_cast<long>(n) - 1));
    }
  }

  TEST_CASE("membership and scaled copies") {
    const CantorScheme s;
    CHECK(s.membership(Rational(0), 5));
    CHECK_FALSE(s.membership(Rational(1, 2), 1));
    CHECK(s.membership(Rational(3, 8), 1));
    const CantorScheme t({Rational(1, 4), Rational(1, 2)});
    CHECK(t.elementary_length(2) == CantorScheme::b(2) / 4);
    CHECK_THROWS_AS(CantorScheme({Rational(1), Rational(1)}), DomainError);
  }

  TEST_CASE("copy layout tiles the block") {
    const Interval block{Rational(0), Rational(1, 4)};
    const auto pieces = copy_layout(block, 2);
    Rational cursor = block.lo;
    for (const auto& p : pieces) {
      CHECK(p.interval.lo == cursor);
      cursor = p.interval.hi;
    }
    CHECK(cursor == block.hi);
    CHECK(pieces.size() == 7);
  }

  TEST_CASE("iterated filling leaves 2^-n") {
    FillScheme f;
    for (unsigned n = 0; n <= 8; ++n) CHECK(f.fill_measure(n) == 1 - pow2(-static_cast<long>(n)));
  }
}

TEST_SUITE("cantor") {
  TEST_CASE("enumeration on a general base matches the recursion") {
    const CantorScheme s({Rational(1, 3), Rational(2, 3)});
    const auto I = s.elementary_intervals(3);
    REQUIRE(I.size() == 8);
    CHECK(I.front().lo == Rational(1, 3));
    CHECK(I.back().hi == Rational(2, 3));
    for (const Interval& J : I) CHECK(J.length() == s.elementary_length(3));
    for (std::size_t i = 1; i < I.size(); ++i) CHECK(I[i - 1].hi < I[i].lo);
    // The level-1 gap sits in the middle and has length (1/3) / 4.
    CHECK(I[4].lo - I[3].hi == Rational(1, 12));
  }
}
