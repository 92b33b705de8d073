#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "singhom/constructions.hpp"
#include "singhom/measure.hpp"
#include "singhom/serialize.hpp"

using namespace singhom;

namespace {

RBox box(std::initializer_list<Rational> lo, std::initializer_list<Rational> hi) { return RBox{lo, hi}; }

}  // namespace

TEST_SUITE("measure") {
  TEST_CASE("length analysis of the identity") {
    const LengthAnalysis la = length_analysis(PLFunc::identity(), 4);
    CHECK(la.ell_n == doctest::Approx(std::sqrt(2.0)));
    CHECK(la.flat_measure == 0);
    CHECK(la.deficit_inequality);
    CHECK(la.mesh < Rational(1, 4));
  }

  TEST_CASE("graph area of the identity and of a product") {
    const RBox Q = box({Rational(1, 4), Rational(1, 4)}, {Rational(1, 2), Rational(1, 2)});
    const AreaReport id = graph_area_pa(HomeoExpr::identity(2), Q);
    CHECK(id.lower == Rational(1, 8));
    CHECK(id.upper == Rational(1, 8));
    // Both factors have slope 3/2 on the box, so the Jacobian is 1 + 9/4.
    const PLFunc f({Rational(0), Rational(1, 2), Rational(1)}, {Rational(0), Rational(3, 4), Rational(1)});
    const AreaReport pr = graph_area_pa(HomeoExpr::product({f, f}), box({Rational(0), Rational(0)}, {Rational(1, 2), Rational(1, 2)}));
    CHECK(pr.lower == Rational(13, 16));
    CHECK(pr.upper == Rational(13, 16));
  }

  TEST_CASE("gram determinant by Cauchy-Binet") {
    CHECK(gram_determinant({Rational(1), Rational(0), Rational(0), Rational(1)}, 2) == 4);
    CHECK(gram_determinant({Rational(1), Rational(3), Rational(0), Rational(1)}, 2) == 13);
  }

  TEST_CASE("polyline length equals the one-dimensional graph area") {
    SplitMix64 rng(21);
    for (int k = 0; k < 10; ++k) {
      const PLFunc f = testing_support::random_homeo(rng, 8);
      const AreaReport a = graph_area_pa(HomeoExpr::product({f}), RBox::unit(1));
      CHECK(a.area == doctest::Approx(polyline_length(f)).epsilon(1e-14));
      CHECK(to_double(a.lower) <= polyline_length(f) + 1e-15);
      CHECK(to_double(a.upper) >= polyline_length(f) - 1e-15);
    }
  }

  TEST_CASE("taper regions of a slide are refused") {
    const HomeoExpr s = HomeoExpr::slide(parse_pl("pl((0,0),(1/2,1/10),(1,0))"), Rational(1, 4), 2);
    CHECK_THROWS_AS(graph_area_pa(s, RBox::unit(2)), UnsupportedExpression);
    CHECK_NOTHROW(graph_area_pa(s, box({Rational(1, 4), Rational(0)}, {Rational(3, 4), Rational(1)})));
  }

  TEST_CASE("box cover bounds the area from above") {
    const RBox Q = box({Rational(1, 4), Rational(1, 4)}, {Rational(1, 2), Rational(1, 2)});
    const CoverReport c = box_cover_upper(HomeoExpr::identity(2), Q, 3, 6);
    CHECK(c.certified);
    CHECK(c.rows.size() == 4);
    CHECK(c.upper >= 0.125);
  }

  TEST_CASE("H^d_delta bounds are nondecreasing as delta shrinks") {
    const RBox Q = box({Rational(1, 4), Rational(1, 4)}, {Rational(1, 2), Rational(1, 2)});
    for (const char* t : {"slide(phi=triwave(slope=6, amp=1/16), delta=1/8)", "product(singular(stage=2), id)",
                          "powermap(3/2, 2)"}) {
      CAPTURE(t);
      const CoverReport c = box_cover_upper(parse_expr(t), Q, 2, 7);
      for (std::size_t i = 1; i < c.rows.size(); ++i) CHECK(c.rows[i].h_delta >= c.rows[i - 1].h_delta);
      CHECK(c.rows.back().h_delta == c.upper);
    }
  }

  TEST_CASE("mass distribution modes agree") {
    const HomeoExpr s = HomeoExpr::slide(parse_pl("triwave(slope=6, amp=1/16)"), Rational(1, 8), 2);
    const RBox Q = box({Rational(1, 4), Rational(1, 4)}, {Rational(1, 2), Rational(1, 2)});
    const MassReport a = mass_distribution_lower(s, Q, 1, 4);
    CHECK(a.mode == "slide-density");
    // The same map behind a trivial product takes the cell path.
    const HomeoExpr t = HomeoExpr::compose(s, HomeoExpr::product({PLFunc::identity(), PLFunc::identity()}));
    const MassReport b = mass_distribution_lower(t, Q, 1, 4);
    CHECK(b.mode == "exact-cells");
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(*a.rows[i].max_mass_exact == *b.rows[i].max_mass_exact);
  }

  TEST_CASE("histogram of a product and the singularity score") {
    const OccupationHist h = pushforward_hist(HomeoExpr::identity(2), 3);
    CHECK(h.exact);
    CHECK(h.cells() == 64);
    CHECK(singularity_score(h, 0.1) == doctest::Approx(58.0 / 64));
    const HomeoExpr f = HomeoExpr::product({strongly_singular_1d(3), strongly_singular_1d(3)});
    CHECK(singularity_score(pushforward_hist(f, 6), 0.1) < 0.5);
    const OccupationHist mc = pushforward_hist(HomeoExpr::radial_expand({0.5, 0.5}, 0.2, 0.05), 2,
                                               HistOptions{20000, 4});
    CHECK_FALSE(mc.exact);
    double total = 0;
    for (double m : mc.mass) total += m;
    CHECK(total == doctest::Approx(1.0));
  }

  TEST_CASE("local volume ratio") {
    const LocalRatio r = local_ratio(HomeoExpr::power_map({2.0, 2.0}), {0.5, 0.5}, 0.01);
    CHECK(r.exact);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("difference quotients of the identity are flat") {
    for (ProbeFrame fr : {ProbeFrame::Cube, ProbeFrame::Cylinder}) {
      const auto prof = diff_quotient_profile(HomeoExpr::identity(2), {0.3, 0.6}, 2, 6, fr);
      for (const auto& row : prof) CHECK(row.quotient == doctest::Approx(1.0));
    }
  }

  TEST_CASE("onto check for a small slide") {
    const HomeoExpr s = HomeoExpr::slide(parse_pl("pl((0,0),(1/2,1/40),(1,0))"), Rational(1, 10), 2);
    const OntoReport r = onto_check(s, {0.5, 0.5}, 0.03, 0.2, 200, 3);
    CHECK(r.precondition_ok);
    CHECK(r.max_residual < 1e-8);
    CHECK(r.counterexamples.empty());
    CHECK(onto_check(s, {0.5, 0.5}, 0.3, 0.2, 10, 3).vacuous);
  }
}
