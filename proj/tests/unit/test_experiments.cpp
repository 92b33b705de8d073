#include "doctest.h"
#include "singhom/experiments.hpp"

using namespace singhom;

TEST_SUITE("experiments") {
  TEST_CASE("catalog and configuration") {
    CHECK(experiment_catalog().size() == 6);
    const ExperimentInfo& info = experiment_info("generic-area");
    const Config c = resolve_config(info, {{"C", "5"}});
    CHECK(c.at("C") == "5");
    CHECK(c.at("d") == "2");
    CHECK_THROWS_AS(resolve_config(info, {{"bogus", "1"}}), PreconditionError);
    CHECK_THROWS_AS(experiment_info("no-such-thing"), PreconditionError);
  }

  TEST_CASE("stochastic experiments need a seed") {
    CHECK(experiment_info("banach-mycielski").stochastic);
    CHECK_THROWS_AS(run_experiment("banach-mycielski", {}, RunOptions{}), PreconditionError);
  }

  TEST_CASE("runs are deterministic for a fixed seed and job count independent") {
    const Config small{{"stages", "3"}, {"witnesses", "3"}, {"witness_grid", "256"}};
    const ExperimentResult a = run_experiment("banach-mycielski", small, RunOptions{11, 1});
    const ExperimentResult b = run_experiment("banach-mycielski", small, RunOptions{11, 3});
    CHECK(a.series.csv() == b.series.csv());
    CHECK(run_document(a)["content_sha1"] == run_document(b)["content_sha1"]);
    const ExperimentResult c = run_experiment("banach-mycielski", small, RunOptions{12, 1});
    // The length table is deterministic; only the witnesses depend on the seed.
    CHECK(a.series.csv() == c.series.csv());
    CHECK(run_document(a)["summary"] != run_document(c)["summary"]);
  }

  TEST_CASE("generic area reaches every target") {
    const ExperimentResult r = run_experiment("generic-area", {{"C", "1,10"}}, RunOptions{});
    CHECK(r.passed);
    CHECK(r.series.rows.size() >= 2);
  }

  TEST_CASE("list parsing") {
    CHECK(parse_unsigned_list("1,2, 4") == std::vector<unsigned>{1, 2, 4});
    CHECK(parse_rational_list("1/2,0.25").at(1) == Rational(1, 4));
    CHECK_THROWS(parse_unsigned_list("1,x"));
    CHECK(format_double(0.1) == "0.10000000000000001");
  }

  TEST_CASE("svg output is well formed") {
    Series s;
    s.columns = {{"x", true}, {"y", false}};
    s.rows = {{"1", "2"}, {"2", "3"}};
    const std::string svg = render_svg(s, PlotSpec{"t", "x", "y", "x", {"y"}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
  }
}
