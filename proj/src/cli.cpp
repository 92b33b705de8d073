#include "singhom/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "singhom/cantor.hpp"
#include "singhom/experiments.hpp"
#include "singhom/homeo.hpp"
#include "singhom/measure.hpp"
#include "singhom/serialize.hpp"

namespace singhom {

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  bool exact = false;
  bool floating = false;
  unsigned jobs = 1;
};

// Raised for verification failures so that main can map it to exit 1.
struct VerificationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int report_error(const std::string& kind, const std::string& message, int code) {
  json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << std::endl;
  return code;
}

// Loaded document: exactly one of the members is set.
struct Loaded {
  std::string kind;
  std::optional<HomeoExpr> expr;
  std::optional<PLFunc> pl;
  json doc;
};

Loaded load(const std::string& path) {
  Loaded out;
  out.doc = read_json_file(path);
  if (!out.doc.is_object() || !out.doc.contains("kind") || !out.doc["kind"].is_string())
    throw ParseError("'" + path + "' has no \"kind\" field");
  out.kind = out.doc["kind"].get<std::string>();
  if (out.kind == "homeo") {
    if (!out.doc.contains("expr")) throw ParseError("homeo document without \"expr\"");
    out.expr = homeo_from_json(out.doc["expr"]);
  } else if (out.kind == "plfunc") {
    if (!out.doc.contains("breakpoints")) throw ParseError("plfunc document without \"breakpoints\"");
    out.pl = plfunc_from_json(out.doc["breakpoints"]);
  } else if (out.kind != "cantor" && out.kind != "run") {
    throw ParseError("unknown document kind '" + out.kind + "'");
  }
  return out;
}

HomeoExpr as_homeo(const Loaded& l) {
  if (l.expr) return *l.expr;
  if (l.pl) return HomeoExpr::product(std::vector<PLFunc>{*l.pl});
  throw PreconditionError("a " + l.kind + " document is not a map of the cube");
}

const PLFunc& as_pl(const Loaded& l) {
  if (!l.pl) throw PreconditionError("this estimator needs a plfunc document");
  return *l.pl;
}

void emit(const Globals& g, const std::string& stem, const json& j, const std::string& csv) {
  const std::string text = g.format == "csv" ? csv : dump(j);
  std::cout << text;
  if (!g.out.empty()) write_atomic((fs::path(g.out) / (stem + (g.format == "csv" ? ".csv" : ".json"))).string(), text);
}

std::string csv_of(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  Series s;
  for (const auto& h : header) s.columns.push_back({h, false});
  s.rows = rows;
  return s.csv();
}

RBox parse_box(const std::string& text, int d) {
  if (text.empty()) return RBox::unit(d);
  const auto v = parse_rational_list(text);
  if (v.size() != static_cast<std::size_t>(2 * d))
    throw ParseError("--box needs " + std::to_string(2 * d) + " numbers lo1,hi1,...");
  RBox b;
  for (int i = 0; i < d; ++i) {
    b.lo.push_back(v[2 * i]);
    b.hi.push_back(v[2 * i + 1]);
    if (!(sgn(b.lo.back()) >= 0 && b.lo.back() < b.hi.back() && b.hi.back() <= 1))
      throw ParseError("--box coordinates must satisfy 0 <= lo < hi <= 1");
  }
  return b;
}

Point parse_point(const std::string& text, int d) {
  Point p;
  for (const auto& q : parse_rational_list(text)) p.push_back(to_double(q));
  if (p.size() != static_cast<std::size_t>(d)) throw ParseError("point needs " + std::to_string(d) + " coordinates");
  return p;
}

std::uint64_t require_seed(const Globals& g, const std::string& what) {
  if (!g.seed) throw PreconditionError(what + " is stochastic and needs --seed");
  return *g.seed;
}

// ---------------------------------------------------------------------------

struct ConstructArgs {
  std::string expr, pl;
  std::optional<unsigned> cantor;
};

int do_construct(const Globals& g, const ConstructArgs& a) {
  json doc;
  std::string stem;
  if (!a.expr.empty()) {
    doc = homeo_document(parse_expr(a.expr), a.expr);
    stem = "expr";
  } else if (!a.pl.empty()) {
    doc = pl_document(parse_pl(a.pl), a.pl);
    stem = "pl";
  } else {
    if (*a.cantor > 20) throw PreconditionError("cantor level above 20 is not serialized");
    doc = cantor_json(CantorScheme(), *a.cantor);
    stem = "cantor";
  }
  const std::string text = dump(doc);
  if (g.out.empty()) {
    std::cout << text;
  } else {
    const std::string path = (fs::path(g.out) / (stem + ".json")).string();
    write_atomic(path, text);
    std::cout << dump(json{{"written", path}, {"sha1", git_blob_sha1(text)}});
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MeasureArgs {
  std::string in, estimator, box, point, center, frame = "cube";
  unsigned n_lo = 1, n_hi = 6, k = 6, k_lo = 2, k_hi = 6, n = 8;
  std::string eps = "1/10";
  double radius = 0.05, alpha = 0.0, beta = 0.0;
  std::size_t samples = 10000;
};

int do_measure(const Globals& g, const MeasureArgs& a) {
  const Loaded l = load(a.in);
  const std::string& est = a.estimator;
  json j{{"estimator", est}, {"input", a.in}};
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  if (est == "polyline") {
    const double len = polyline_length(as_pl(l));
    j["length"] = len;
    header = {"length"};
    rows = {{format_double(len)}};
  } else if (est == "length") {
    const LengthAnalysis la = length_analysis(as_pl(l), a.n);
    j.update({{"n", la.n},
              {"mesh", to_string(la.mesh)},
              {"partition_size", la.partition_size},
              {"ell_n", la.ell_n},
              {"flat_measure", to_string(la.flat_measure)},
              {"deficit_sum", la.deficit_sum},
              {"near_two", la.near_two},
              {"flat_bound", to_string(la.flat_bound)},
              {"flat_bound_holds", la.flat_bound_holds},
              {"deficit_inequality", la.deficit_inequality}});
    header = {"n", "ell_n", "flat_measure", "deficit_sum"};
    rows = {{std::to_string(la.n), format_double(la.ell_n), to_string(la.flat_measure), format_double(la.deficit_sum)}};
  } else if (est == "area") {
    const HomeoExpr e = as_homeo(l);
    const AreaReport r = graph_area_pa(e, parse_box(a.box, e.dim()));
    j.update({{"area", r.area}, {"lower", to_string(r.lower)}, {"upper", to_string(r.upper)}, {"cells", r.cells}});
    header = {"area", "lower", "upper", "cells"};
    rows = {{format_double(r.area), to_string(r.lower), to_string(r.upper), std::to_string(r.cells)}};
  } else if (est == "cover") {
    const HomeoExpr e = as_homeo(l);
    const CoverReport r = box_cover_upper(e, parse_box(a.box, e.dim()), a.k_lo, a.k_hi);
    if (g.exact && !r.certified) throw UnsupportedExpression("cover enclosure was sampled, not certified");
    json rs = json::array();
    header = {"k", "boxes", "value", "h_delta"};
    for (const auto& row : r.rows) {
      rs.push_back({{"k", row.k}, {"boxes", row.boxes}, {"value", row.value}, {"h_delta", row.h_delta}});
      rows.push_back({std::to_string(row.k), std::to_string(row.boxes), format_double(row.value),
                      format_double(row.h_delta)});
    }
    j.update({{"rows", rs}, {"upper", r.upper}, {"certified", r.certified}});
  } else if (est == "mass") {
    const HomeoExpr e = as_homeo(l);
    MassOptions mo;
    mo.allow_mc = !g.exact;
    if (mo.allow_mc && g.seed) mo.seed = *g.seed;
    mo.mc_samples = a.samples;
    MassReport r;
    try {
      mo.allow_mc = false;
      r = mass_distribution_lower(e, parse_box(a.box, e.dim()), a.n_lo, a.n_hi, mo);
    } catch (const UnsupportedExpression&) {
      if (g.exact) throw;
      mo.allow_mc = true;
      mo.seed = require_seed(g, "the Monte Carlo mass estimate");
      r = mass_distribution_lower(e, parse_box(a.box, e.dim()), a.n_lo, a.n_hi, mo);
    }
    json rs = json::array();
    header = {"n", "max_mass", "stderr", "lower_sup", "lower_euclid", "lower_valid"};
    for (const auto& row : r.rows) {
      rs.push_back({{"n", row.n}, {"max_mass", row.max_mass}, {"stderr", row.stderr_max},
                    {"lower_sup", row.lower_sup}, {"lower_euclid", row.lower_euclid},
                    {"lower_valid", row.lower_valid}});
      rows.push_back({std::to_string(row.n), format_double(row.max_mass), format_double(row.stderr_max),
                      format_double(row.lower_sup), format_double(row.lower_euclid),
                      format_double(row.lower_valid)});
    }
    j.update({{"mode", r.mode}, {"norm", r.norm}, {"rows", rs}, {"lower", r.lower}, {"best_scale", r.best_scale}});
  } else if (est == "hist" || est == "score") {
    const HomeoExpr e = as_homeo(l);
    HistOptions ho;
    ho.mc_samples = a.samples;
    if (g.seed) ho.seed = *g.seed;
    if (!separable_marginals(e, 1)) {
      if (g.exact) throw UnsupportedExpression("pushforward of " + e.kind() + " has no exact histogram");
      ho.seed = require_seed(g, "the Monte Carlo histogram");
    }
    const OccupationHist h = pushforward_hist(e, a.k, ho);
    const double eps = to_double(parse_rational(a.eps));
    const double score = singularity_score(h, eps);
    j.update({{"k", h.k}, {"exact", h.exact}, {"stderr_max", h.stderr_max}, {"eps", a.eps}, {"score", score}});
    if (est == "hist") {
      j["mass"] = h.mass;
      header = {"cell", "mass"};
      for (std::size_t i = 0; i < h.cells(); ++i) rows.push_back({std::to_string(i), format_double(h.mass[i])});
    } else {
      header = {"k", "eps", "score"};
      rows = {{std::to_string(h.k), a.eps, format_double(score)}};
    }
  } else if (est == "local-ratio") {
    const HomeoExpr e = as_homeo(l);
    const Point x = parse_point(a.point, e.dim());
    if (!separable_marginals(e, 1)) require_seed(g, "the Monte Carlo local ratio");
    const LocalRatio r = local_ratio(e, x, a.radius, a.samples, g.seed.value_or(0));
    j.update({{"ratio", r.ratio}, {"ball_factor", r.ball_factor}, {"exact", r.exact}, {"stderr", r.stderr_}});
    header = {"ratio", "stderr"};
    rows = {{format_double(r.ratio), format_double(r.stderr_)}};
  } else if (est == "profile") {
    const HomeoExpr e = as_homeo(l);
    const Point x = parse_point(a.point, e.dim());
    const auto prof = diff_quotient_profile(e, x, a.n_lo, a.n_hi,
                                            a.frame == "cylinder" ? ProbeFrame::Cylinder : ProbeFrame::Cube);
    json rs = json::array();
    header = {"n", "quotient", "distance"};
    for (const auto& row : prof) {
      rs.push_back({{"n", row.n}, {"quotient", row.quotient}, {"distance", row.distance}});
      rows.push_back({std::to_string(row.n), format_double(row.quotient), format_double(row.distance)});
    }
    j["rows"] = rs;
  } else if (est == "onto") {
    const HomeoExpr e = as_homeo(l);
    const OntoReport r = onto_check(e, parse_point(a.center, e.dim()), a.alpha, a.beta, a.samples,
                                    require_seed(g, "onto_check"));
    j.update({{"vacuous", r.vacuous},
              {"samples", r.samples},
              {"max_residual", r.max_residual},
              {"max_displacement", r.max_displacement},
              {"precondition_ok", r.precondition_ok},
              {"max_iterations", r.max_iterations},
              {"counterexamples", r.counterexamples.size()}});
    header = {"max_residual", "max_displacement", "counterexamples"};
    rows = {{format_double(r.max_residual), format_double(r.max_displacement),
             std::to_string(r.counterexamples.size())}};
  } else if (est == "roundtrip") {
    const HomeoExpr e = as_homeo(l);
    const double err = roundtrip_error(e, a.samples, require_seed(g, "roundtrip"));
    j["max_error"] = err;
    header = {"samples", "max_error"};
    rows = {{std::to_string(a.samples), format_double(err)}};
  }
  emit(g, "measure", j, csv_of(header, rows));
  return 0;
}

// ---------------------------------------------------------------------------

double radical_inverse(std::uint64_t i, unsigned base) {
  double f = 1, r = 0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Deterministic low-discrepancy points, so verification needs no seed.
std::vector<Point> halton(int d, std::size_t count) {
  static const unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (d > 12) throw PreconditionError("verification supports d <= 12");
  std::vector<Point> out;
  for (std::size_t i = 1; i <= count; ++i) {
    Point p(d);
    for (int k = 0; k < d; ++k) p[k] = radical_inverse(i, primes[k]);
    out.push_back(p);
  }
  return out;
}

struct Check {
  std::string name;
  bool ok;
  json value;
};

int do_verify(const Globals& g, const std::string& in) {
  const Loaded l = load(in);
  std::vector<Check> checks;
  if (l.expr) {
    const HomeoExpr& e = *l.expr;
    double worst = 0;
    bool inside = true;
    for (const Point& x : halton(e.dim(), 10000)) {
      const Point y = e.eval(x);
      for (double v : y) inside = inside && v >= 0.0 && v <= 1.0;
      const Point z = e.inverse_eval(y);
      for (int i = 0; i < e.dim(); ++i) worst = std::max(worst, std::abs(z[i] - x[i]));
    }
    checks.push_back({"roundtrip_below_1e-10", worst < 1e-10, worst});
    checks.push_back({"image_in_cube", inside, inside});
    const double bd = boundary_displacement(e);
    checks.push_back({"boundary_displacement", true, bd});
    checks.push_back({"depth", true, e.depth()});
  } else if (l.pl) {
    const PLFunc& f = *l.pl;
    checks.push_back({"monotone_homeomorphism", f.monotone_homeo(), f.monotone_homeo()});
    if (f.monotone_homeo()) {
      const Rational sum = partition_increment_sum(f, f.xs());
      checks.push_back({"increment_sum_is_2", sum == 2, to_string(sum)});
      const double len = polyline_length(f);
      checks.push_back({"polyline_at_most_2", len <= 2.0, len});
    }
  } else if (l.kind == "cantor") {
    const unsigned level = l.doc.at("level").get<unsigned>();
    const json fresh = cantor_json(CantorScheme(), level);
    checks.push_back({"matches_construction", fresh == l.doc, fresh == l.doc});
    const Rational b = rational_from_json(l.doc.at("elementary_length"));
    const Rational expect = pow2(-static_cast<long>(level) - 1) + pow2(-2 * static_cast<long>(level) - 1);
    checks.push_back({"elementary_length_formula", level == 0 || b == expect, to_string(b)});
  } else {
    // A run document: recompute its content hash.
    json body = l.doc;
    const std::string claimed = body.value("content_sha1", "");
    body.erase("content_sha1");
    const std::string actual = git_blob_sha1(body.dump());
    checks.push_back({"content_sha1", claimed == actual, actual});
  }
  bool ok = true;
  json cj = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : checks) {
    ok = ok && c.ok;
    cj.push_back({{"check", c.name}, {"ok", c.ok}, {"value", c.value}});
    rows.push_back({c.name, c.ok ? "true" : "false", c.value.dump()});
  }
  emit(g, "verify", json{{"input", in}, {"kind", l.kind}, {"passed", ok}, {"checks", cj}},
       csv_of({"check", "ok", "value"}, rows));
  if (!ok) throw VerificationFailed("verification of '" + in + "' failed");
  return 0;
}

// ---------------------------------------------------------------------------

void outline(const HomeoExpr& e, int indent, std::vector<std::string>& out) {
  const std::string pad(static_cast<std::size_t>(2 * indent), ' ');
  std::string line = pad + e.kind();
  const Node& n = e.node();
  if (const auto* p = std::get_if<Product1DNode>(&n.v)) {
    line += " [";
    for (std::size_t i = 0; i < p->f.size(); ++i) line += (i ? ", " : "") + std::to_string(p->f[i]->size()) + " pts";
    line += "]";
  } else if (const auto* s = std::get_if<SlideNode>(&n.v)) {
    line += " phi " + std::to_string(s->phi->size()) + " pts, delta " + to_string(s->delta_lo) + "/" +
            to_string(s->delta_hi) + ", sup|phi| " + to_string(s->phi->sup_abs());
  } else if (const auto* t = std::get_if<RadialTwistNode>(&n.v)) {
    line += " h " + std::to_string(t->h->size()) + " pts, phi " + std::to_string(t->phi->size()) + " pts";
  } else if (const auto* pm = std::get_if<PowerMapNode>(&n.v)) {
    line += " s =";
    for (double v : pm->s) line += " " + format_double(v);
  } else if (const auto* x = std::get_if<RadialExpandNode>(&n.v)) {
    line += " r " + format_double(x->r) + ", eta " + format_double(x->eta);
  }
  out.push_back(line);
  if (const auto* c = std::get_if<ComposeNode>(&n.v)) {
    outline(c->outer, indent + 1, out);
    outline(c->inner, indent + 1, out);
  } else if (const auto* inv = std::get_if<InverseNode>(&n.v)) {
    outline(inv->inner, indent + 1, out);
  }
}

int do_inspect(const Globals& g, const std::string& in) {
  const Loaded l = load(in);
  std::ifstream f(in, std::ios::binary);
  std::ostringstream raw;
  raw << f.rdbuf();
  json j{{"input", in}, {"kind", l.kind}, {"file_sha1", git_blob_sha1(raw.str())}};
  if (l.doc.contains("source")) j["source"] = l.doc["source"];
  if (l.expr) {
    std::vector<std::string> lines;
    outline(*l.expr, 0, lines);
    j.update({{"dim", l.expr->dim()}, {"root", l.expr->kind()}, {"depth", l.expr->depth()}, {"outline", lines}});
  } else if (l.pl) {
    j.update({{"breakpoints", l.pl->size()},
              {"monotone_homeo", l.pl->monotone_homeo()},
              {"min", to_string(l.pl->min_value())},
              {"max", to_string(l.pl->max_value())}});
  } else if (l.kind == "cantor") {
    j.update({{"level", l.doc.at("level")}, {"elementary_length", l.doc.at("elementary_length")},
              {"intervals", l.doc.at("elementary").size()}});
  } else {
    for (const char* k : {"experiment", "claim", "config", "seed", "passed", "series_sha1", "content_sha1"})
      if (l.doc.contains(k)) j[k] = l.doc[k];
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& [k, v] : j.items()) rows.push_back({k, v.is_string() ? v.get<std::string>() : v.dump()});
  emit(g, "inspect", j, csv_of({"field", "value"}, rows));
  return 0;
}

// ---------------------------------------------------------------------------

int do_experiment(const Globals& g, const std::string& name, const Config& overrides) {
  RunOptions opt;
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  const ExperimentResult r = run_experiment(name, overrides, opt);
  const std::string dir = g.out.empty() ? (fs::path("runs") / name).string() : g.out;
  write_run_files(r, dir);
  if (g.format == "csv") std::cout << r.series.csv();
  else std::cout << dump(run_document(r));
  if (!r.passed) {
    for (const auto& f : r.failures) std::cerr << "check failed: " << f << "\n";
    throw VerificationFailed("experiment " + name + " failed " + std::to_string(r.failures.size()) + " check(s)");
  }
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Singular homeomorphisms of the cube: constructions, estimators and experiments", "singhom"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI file; [experiment.NAME] sections set experiment parameters");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "seed for every random choice");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--format", g.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
  auto* exact_flag = app.add_flag("--exact", g.exact, "refuse sampled or floating-point fallbacks");
  app.add_flag("--float", g.floating, "allow sampled fallbacks (default)")->excludes(exact_flag);
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::Range(1u, 256u));

  auto* construct = app.add_subcommand("construct", "build and serialize an object");
  ConstructArgs ca;
  auto* grp = construct->add_option_group("object");
  grp->add_option("--expr", ca.expr, "homeomorphism expression");
  grp->add_option("--pl", ca.pl, "one-dimensional PL function");
  grp->add_option("--cantor", ca.cantor, "Smith-Volterra-Cantor scheme up to this level");
  grp->require_option(1);

  auto* measure = app.add_subcommand("measure", "run one estimator on a serialized object");
  MeasureArgs ma;
  measure->add_option("--in", ma.in, "input document")->required()->check(CLI::ExistingFile);
  measure->add_option("--estimator", ma.estimator, "estimator")
      ->required()
      ->check(CLI::IsMember({"polyline", "length", "area", "cover", "mass", "hist", "score", "local-ratio", "profile",
                             "onto", "roundtrip"}));
  measure->add_option("--box", ma.box, "domain box lo1,hi1,lo2,hi2,... (default the unit cube)");
  measure->add_option("--n", ma.n, "n of the length analysis");
  measure->add_option("--n-lo", ma.n_lo, "first scale");
  measure->add_option("--n-hi", ma.n_hi, "last scale");
  measure->add_option("--k", ma.k, "histogram resolution");
  measure->add_option("--k-lo", ma.k_lo, "first cover scale");
  measure->add_option("--k-hi", ma.k_hi, "last cover scale");
  measure->add_option("--eps", ma.eps, "singularity score tolerance");
  measure->add_option("--point", ma.point, "probe point x1,x2,...");
  measure->add_option("--center", ma.center, "ball center for onto");
  measure->add_option("--radius", ma.radius, "box half-width for local-ratio");
  measure->add_option("--alpha", ma.alpha, "sup-distance bound for onto");
  measure->add_option("--beta", ma.beta, "ball radius for onto");
  measure->add_option("--samples", ma.samples, "sample count");
  measure->add_option("--frame", ma.frame, "probe frame")->check(CLI::IsMember({"cube", "cylinder"}));

  auto* verify = app.add_subcommand("verify", "run the invariant suite on a serialized object");
  std::string verify_in;
  verify->add_option("--in", verify_in, "input document")->required();

  auto* inspect = app.add_subcommand("inspect", "show parameters and provenance of a serialized object");
  std::string inspect_in;
  inspect->add_option("--in", inspect_in, "input document")->required();

  auto* experiment = app.add_subcommand("experiment", "run a named experiment");
  experiment->require_subcommand(1, 1);
  std::map<std::string, Config> values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& info : experiment_catalog()) {
    auto* sub = experiment->add_subcommand(info.name, info.claim);
    sub->configurable();
    for (const auto& p : info.params) {
      auto* o = sub->add_option("--" + p.key, values[info.name][p.key], p.help + " (default " + p.default_value + ")");
      // Config files split list values; join them back into one string.
      o->multi_option_policy(CLI::MultiOptionPolicy::Join)->delimiter(',');
      options[info.name].emplace_back(p.key, o);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  try {
    if (construct->parsed()) return do_construct(g, ca);
    if (measure->parsed()) return do_measure(g, ma);
    if (verify->parsed()) return do_verify(g, verify_in);
    if (inspect->parsed()) return do_inspect(g, inspect_in);
    // Config sections may mark several experiments as parsed; the one named
    // on the command line is the one to run.
    std::string chosen;
    for (int i = 1; i + 1 < argc && chosen.empty(); ++i)
      if (std::string(argv[i]) == "experiment")
        for (int k = i + 1; k < argc && chosen.empty(); ++k)
          for (const auto& info : experiment_catalog())
            if (info.name == argv[k]) chosen = info.name;
    for (const auto& info : experiment_catalog()) {
      if (info.name != chosen) continue;
      Config overrides;
      for (const auto& [key, opt] : options[info.name])
        if (opt->count() > 0) overrides[key] = values[info.name][key];
      return do_experiment(g, info.name, overrides);
    }
    return report_error("usage", "no command given", 2);
  } catch (const VerificationFailed& e) {
    return report_error("verification", e.what(), 1);
  } catch (const ParseError& e) {
    return report_error("parse", e.what(), 2);
  } catch (const PreconditionError& e) {
    return report_error("precondition", e.what(), 2);
  } catch (const UnsupportedExpression& e) {
    return report_error("unsupported", e.what(), 2);
  } catch (const DomainError& e) {
    return report_error("domain", e.what(), 2);
  } catch (const InvariantViolation& e) {
    return report_error("invariant", e.what(), 2);
  } catch (const std::exception& e) {
    return report_error("io", e.what(), 2);
  }
}

}  // namespace singhom
