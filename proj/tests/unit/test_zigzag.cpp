#include "doctest.h"
#include "singhom/zigzag.hpp"

using namespace singhom;

namespace {

// lambda(I ∩ B_i ∩ phi_m^{-1}(J)) for every piece and every child cell J of
// the piece's cell; returns the number of pairs checked, or 0 on a mismatch.
std::size_t check_occupancy(const Zigzag& z, unsigned m) {
  const unsigned level = 1u << (m - 1);
  const Rational W = pow2(-static_cast<long>(level));
  const unsigned long K = 1ul << level;
  const Rational w = W / K;
  std::size_t pairs = 0;
  for (const ZigzagPiece& p : z.pieces(m)) {
    for (unsigned long c = 0; c < K; ++c) {
      const Interval J{p.cell_lo + w * c, p.cell_lo + w * (c + 1)};
      if (preimage_measure(z.stage(m), p.domain, J) != p.domain.length() / K) return 0;
      ++pairs;
    }
  }
  return pairs;
}

}  // namespace

TEST_SUITE("zigzag") {
  TEST_CASE("s-sequences and the a_m ladder") {
    const SSequence s = SSequence::parse("pow2:3");
    CHECK(s.exact(2) == Rational(1, 64));
    CHECK(choose_a(s, 4) == std::vector<unsigned>{1, 2, 3, 6});
    const SSequence d = SSequence::parse("dexp");
    CHECK(d.log2(3) == -16);
    CHECK_THROWS_AS(SSequence::parse("pow3:1"), ParseError);
    CHECK_THROWS_AS(SSequence::parse("pow2:0"), InvariantViolation);
  }

  TEST_CASE("q_n is one below a_0 and shrinks along the ladder") {
    const Zigzag z(SSequence::parse("pow2:1"), 1);
    CHECK(z.q(0) == 1);
    CHECK(z.q(z.a(0)) == 1);
    CHECK(z.q(z.a(3)) == Rational(9, 128));
    CHECK(z.q(z.a(4)) <= z.q(z.a(3)));
  }

  TEST_CASE("every child cell is occupied for the same time") {
    const Zigzag z(SSequence::parse("pow2:3"), 3);
    for (unsigned m = 1; m <= 3; ++m) CHECK(check_occupancy(z, m) > 0);
  }

  TEST_CASE("closed-form pushforward agrees with the generic one") {
    const Zigzag z(SSequence::parse("pow2:3:2"), 3);
    for (unsigned j = 0; j < 8; ++j) {
      const Interval I{Rational(j, 8), Rational(j + 1, 8)};
      const Pushforward a = z.top_pushforward(I);
      const Pushforward b = pushforward(z.top(), I);
      for (unsigned c = 0; c < 32; ++c) {
        const Rational lo(c, 32), hi(c + 1, 32);
        CHECK(a.mass(lo, hi) == b.mass(lo, hi));
      }
    }
  }

  TEST_CASE("stages stay close and keep the values in [0,1]") {
    const Zigzag z(SSequence::parse("pow2:3"), 3);
    for (unsigned m = 1; m <= 3; ++m) {
      CHECK(z.stage(m).min_value() >= 0);
      CHECK(z.stage(m).max_value() <= 1);
      CHECK(sup_distance(z.stage(m), z.stage(m - 1)) <= 2 * pow2(-(1l << (m - 1))));
    }
  }

  TEST_CASE("oscillation certificate on the built stages") {
    const Zigzag z(SSequence::parse("pow2:3"), 3);
    const auto rows = oscillation_certificate(z, 3, 1, z.a(3));
    REQUIRE(!rows.empty());
    for (const auto& r : rows)
      if (r.certified) CHECK(to_double(r.min_oscillation) >= r.s_n);
  }

  TEST_CASE("covering bound below the first rung is trivial") {
    const Zigzag z(SSequence::parse("pow2:3"), 2);
    const CoveringReport rep = verify_covering_bound(z, 2, 0);
    CHECK(rep.q == 1);
    CHECK(rep.passed);
  }
}
