#include <cmath>

#include "doctest.h"
#include "singhom/constructions.hpp"

using namespace singhom;

TEST_SUITE("constructions") {
  TEST_CASE("strongly singular stages are monotone and converge uniformly") {
    StronglySingular ss(3, 2, true);
    for (unsigned m = 1; m <= 5; ++m) {
      const PLFunc& f = ss.stage(m);
      CHECK(f.monotone_homeo());
      CHECK(sup_distance(f, ss.stage(m - 1)) <= pow2(-static_cast<long>(m)));
    }
  }

  TEST_CASE("later stages keep the earlier non-gap pieces") {
    StronglySingular ss;
    const PLFunc& f2 = ss.stage(2);
    const PLFunc& f4 = ss.stage(4);
    const auto& gaps = ss.gap_flags(2);
    for (std::size_t i = 0; i + 1 < f2.size(); ++i) {
      if (gaps[i]) continue;
      const Rational mid = (f2.xs()[i] + f2.xs()[i + 1]) / 2;
      CHECK(f4.eval(mid) == f2.eval(mid));
    }
  }

  TEST_CASE("planted elementary intervals respect the gauge") {
    StronglySingular ss(3, 2, true);
    for (unsigned m = 1; m <= 3; ++m)
      for (const auto& copy : ss.copies(m))
        for (const auto& rec : copy.elementary) {
          const Rational diam = rec.domain.length();
          CHECK(rec.image_length <= diam * diam * diam);
          CHECK(sgn(rec.image_length) > 0);
          const PLFunc& f = ss.stage(m);
          CHECK(f.eval(rec.domain.hi) - f.eval(rec.domain.lo) == rec.image_length);
        }
  }

  TEST_CASE("gap measure after stage m") {
    StronglySingular ss;
    CHECK(ss.enumerated_gap_measure(0) == 1);
    CHECK(ss.enumerated_gap_measure(1) == Rational(3, 8));
    CHECK(ss.enumerated_gap_measure(2) < ss.enumerated_gap_measure(1));
  }

  TEST_CASE("witness sampling is seeded and stays in [1,2]") {
    const HomeoExpr f0 = HomeoExpr::product({strongly_singular_1d(2), strongly_singular_1d(2)});
    const WitnessSample a = sample_witness(f0, 42), b = sample_witness(f0, 42), c = sample_witness(f0, 43);
    CHECK(a.s == b.s);
    CHECK(a.t == b.t);
    CHECK(a.s != c.s);
    for (double v : a.s) CHECK((v >= 1.0 && v <= 2.0));
    CHECK(roundtrip_error(a.expr, 1000, 1) < 1e-10);
  }

  TEST_CASE("nowhere twist parameters") {
    const NowhereTwist tw = build_nowhere_twist(SSequence::parse("pow2:3"), Rational(1, 4), 3, 2, 5);
    CHECK(tw.N == 4);
    CHECK(tw.n_hi == 9);
    for (unsigned n = tw.N; n <= tw.n_hi; ++n)
      CHECK(tw.h.eval(pow2(-static_cast<long>(n))) == pow2(-3 * static_cast<long>(n)));
    CHECK(tw.phi.max_value() <= Rational(1, 4));
    CHECK(roundtrip_error(tw.expr, 2000, 2) < 1e-10);
    CHECK_THROWS_AS(build_nowhere_twist(SSequence::parse("pow2:3"), Rational(1, 4), 1, 2, 5), PreconditionError);
  }

  TEST_CASE("expansion collar width") {
    CHECK(expand_eta_for(0.1, 2) == doctest::Approx(0.025));
  }
}
