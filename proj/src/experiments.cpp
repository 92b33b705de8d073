#include "singhom/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "singhom/cantor.hpp"
#include "singhom/constructions.hpp"
#include "singhom/measure.hpp"
#include "singhom/rng.hpp"
#include "singhom/serialize.hpp"
#include "singhom/zigzag.hpp"

namespace singhom {

// ---------------------------------------------------------------------------
// Catalog and configuration.

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog{
      {"banach-mycielski",
       "The graph of the strongly singular homeomorphism has length tending to 2",
       true,
       {{"stages", "6", "last construction stage m"},
        {"p", "3", "gauge exponent of the planted copies"},
        {"depth", "2", "levels of elementary intervals per copy"},
        {"n_grid", "1,2,4,8,16", "n values of the flat-set table"},
        {"witnesses", "8", "sampled witnesses psi_s o f0 o psi_t"},
        {"witness_grid", "4096", "uniform grid added to the witness partition"}}},
      {"generic-area",
       "A slide with a steep zig-zag makes the graph area over Q exceed any C",
       false,
       {{"d", "2", "dimension"},
        {"C", "1/10,1,10,100", "area targets"},
        {"q_lo", "1/4", "Q = [q_lo, q_hi]^d"},
        {"q_hi", "1/2", "Q = [q_lo, q_hi]^d"},
        {"delta", "1/8", "slide taper width, below the distance of Q to the boundary"},
        {"amp", "1/16", "zig-zag amplitude, below delta"},
        {"margin", "1", "slope excess over the required bound"}}},
      {"twist-infinite-area",
       "Boxes of side 2^-n carry graph measure at most q_n 2^-nd under the zig-zag slide",
       false,
       {{"d", "2", "dimension"},
        {"n_max", "6", "finest scale"},
        {"s", "pow2:3", "modulus sequence s_n (the zig-zag is built for 4 s_n)"},
        {"stages", "3", "zig-zag stages"}}},
      {"nowhere-diff",
       "The radial twist has difference quotients at least s_n 2^n at every probe",
       true,
       {{"d", "2", "dimension"},
        {"s", "pow2:3", "modulus sequence s_n"},
        {"eps", "1/4", "distance of the twist to the identity"},
        {"stages", "3", "zig-zag stages of the angular offset"},
        {"span", "5", "certified scales past N"},
        {"probes", "10", "probe points (the first is on the axis)"},
        {"control", "false", "use the identity instead of the twist"}}},
      {"singular-prevalence",
       "Random power conjugates of a strongly singular product map stay singular",
       true,
       {{"d", "2", "dimension"},
        {"stage", "4", "stage of the singular factor"},
        {"samples", "100", "witness samples"},
        {"k", "8", "histogram resolution 2^-k"},
        {"eps", "1/10", "mass allowed outside the counted cells"},
        {"scan", "1,2,3,4,5", "stages of the baseline scan"},
        {"control", "false", "use the identity as the base map"}}},
      {"semicontinuity",
       "Small piecewise-affine perturbations keep the graph area above C",
       true,
       {{"base", "slide(phi=triwave(slope=18, amp=1/16), delta=1/8)", "base expression"},
        {"C", "1", "area threshold"},
        {"q_lo", "1/4", "Q = [q_lo, q_hi]^d"},
        {"q_hi", "1/2", "Q = [q_lo, q_hi]^d"},
        {"delta", "1/8", "taper used when the base is not a slide"},
        {"eps", "1/10000", "perturbation radius"},
        {"trials", "20", "random perturbations"}}},
  };
  return catalog;
}

const ExperimentInfo& experiment_info(const std::string& name) {
  for (const auto& e : experiment_catalog())
    if (e.name == name) return e;
  throw PreconditionError("unknown experiment '" + name + "'");
}

Config resolve_config(const ExperimentInfo& info, const Config& overrides) {
  Config out;
  for (const auto& p : info.params) out[p.key] = p.default_value;
  for (const auto& [k, v] : overrides) {
    if (!out.count(k)) throw PreconditionError("experiment " + info.name + " has no parameter '" + k + "'");
    out[k] = v;
  }
  return out;
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Params {
 public:
  explicit Params(const Config& c) : c_(c) {}

  const std::string& str(const std::string& k) const { return c_.at(k); }

  Rational rational(const std::string& k) const {
    try {
      return parse_rational(str(k));
    } catch (const ParseError& e) {
      throw ParseError(k + ": " + e.what());
    }
  }

  unsigned count(const std::string& k, unsigned lo = 0) const {
    const Rational q = rational(k);
    if (q.get_den() != 1 || q < lo || q > 100000000)
      throw PreconditionError(k + " must be an integer >= " + std::to_string(lo));
    return static_cast<unsigned>(q.get_num().get_ui());
  }

  bool flag(const std::string& k) const {
    const std::string& v = str(k);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError(k + ": expected true or false, got '" + v + "'");
  }

 private:
  const Config& c_;
};

// Runs fn(i) for i < count on `jobs` threads; results keep index order.
template <class F>
auto parallel_map(std::size_t count, unsigned jobs, F fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using T = decltype(fn(std::size_t{}));
  std::vector<std::optional<T>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= count) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::string q_str(const Rational& q) { return to_string(q); }
std::string d_str(double v) { return format_double(v); }
std::string b_str(bool b) { return b ? "true" : "false"; }

std::uint64_t need_seed(const RunOptions& opt, const std::string& name) {
  if (!opt.seed) throw PreconditionError("experiment " + name + " is stochastic and needs --seed");
  return *opt.seed;
}

RBox cube_box(int d, const Rational& lo, const Rational& hi) {
  RBox Q;
  Q.lo.assign(d, lo);
  Q.hi.assign(d, hi);
  return Q;
}

// ---------------------------------------------------------------------------

// Length of the graph of x -> (f0(x^t))^s on the partition made of the
// pulled-back breakpoints of f0 and a uniform grid.
double witness_length(const PLFunc& f0, double s, double t, unsigned grid) {
  std::vector<double> xs;
  for (double b : f0.xs_double()) xs.push_back(std::pow(b, 1.0 / t));
  for (unsigned j = 0; j <= grid; ++j) xs.push_back(static_cast<double>(j) / grid);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double len = 0, px = 0, py = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = std::min(1.0, xs[i]);
    const double y = std::pow(f0.eval(std::pow(x, t)), s);
    if (i > 0) len += std::hypot(x - px, y - py);
    px = x;
    py = y;
  }
  return len;
}

ExperimentResult banach_mycielski(const Config& cfg, const RunOptions& opt) {
  const Params P(cfg);
  const unsigned stages = P.count("stages", 1);
  const unsigned p = P.count("p", 2);
  const unsigned depth = P.count("depth", 1);
  const auto grid = parse_unsigned_list(P.str("n_grid"));
  const unsigned witnesses = P.count("witnesses");
  const unsigned wgrid = P.count("witness_grid", 1);
  const std::uint64_t seed = need_seed(opt, "banach-mycielski");

  ExperimentResult r;
  r.series.columns = {{"m", true}, {"breakpoints", true}, {"L_m", false}, {"deficit", false},
                      {"shrink", false}, {"gap_measure", true}};
  for (unsigned n : grid) r.series.columns.push_back({"flat_" + std::to_string(n), true});
  r.series.columns.push_back({"deficit_inequality", true});

  StronglySingular ss(p, depth);
  double prev_len = 0, prev_def = 0;
  nlohmann::json lengths = nlohmann::json::array();
  for (unsigned m = 0; m <= stages; ++m) {
    const PLFunc& f = ss.stage(m);
    const double L = polyline_length(f);
    const double def = 2.0 - L;
    std::vector<std::string> row{std::to_string(m), std::to_string(f.size()), d_str(L), d_str(def),
                                 m == 0 ? "" : d_str(def / prev_def), q_str(ss.enumerated_gap_measure(m))};
    bool ineq = true;
    for (unsigned n : grid) {
      const LengthAnalysis la = length_analysis(f, n);
      row.push_back(q_str(la.flat_measure));
      ineq = ineq && la.deficit_inequality;
    }
    row.push_back(b_str(ineq));
    r.series.rows.push_back(std::move(row));
    lengths.push_back(L);

    if (L > 2.0) r.fail("L_" + std::to_string(m) + " exceeds 2");
    if (m > 0 && L < prev_len) r.fail("L_" + std::to_string(m) + " decreased");
    if (m > 1 && !(def < prev_def)) r.fail("2 - L_" + std::to_string(m) + " did not shrink");
    if (!ineq) r.fail("deficit inequality failed at stage " + std::to_string(m));
    prev_len = L;
    prev_def = def;
  }

  // Witnesses of the 1-D prevalence argument built on the last stage.
  const HomeoExpr f0 = HomeoExpr::product(std::vector<PLFunc>{ss.stage(stages)});
  const PLFunc& top = ss.stage(stages);
  auto wl = parallel_map(witnesses, opt.jobs, [&](std::size_t i) {
    const WitnessSample w = sample_witness(f0, seed + i);
    return std::array<double, 3>{w.s[0], w.t[0], witness_length(top, w.s[0], w.t[0], wgrid)};
  });
  nlohmann::json wj = nlohmann::json::array();
  double wmin = 2, wmax = 0, wsum = 0;
  for (std::size_t i = 0; i < wl.size(); ++i) {
    wj.push_back({{"seed", seed + i}, {"s", wl[i][0]}, {"t", wl[i][1]}, {"length", wl[i][2]}});
    wmin = std::min(wmin, wl[i][2]);
    wmax = std::max(wmax, wl[i][2]);
    wsum += wl[i][2];
  }
  r.summary = {{"lengths", lengths},
               {"L_top", prev_len},
               {"deficit_top", 2.0 - prev_len},
               {"witnesses", wj}};
  if (!wl.empty())
    r.summary["witness_stats"] = {{"min", wmin}, {"max", wmax}, {"mean", wsum / wl.size()}};
  r.plot = PlotSpec{"Graph length deficit 2 - L_m", "stage m", "2 - L_m", "m", {"deficit"}, true, "", ""};
  return r;
}

// ---------------------------------------------------------------------------

ExperimentResult generic_area(const Config& cfg, const RunOptions&) {
  const Params P(cfg);
  const int d = static_cast<int>(P.count("d", 2));
  const auto targets = parse_rational_list(P.str("C"));
  const Rational q_lo = P.rational("q_lo"), q_hi = P.rational("q_hi");
  const Rational delta = P.rational("delta"), amp = P.rational("amp"), margin = P.rational("margin");
  if (!(sgn(q_lo) > 0 && q_lo < q_hi && q_hi < 1)) throw PreconditionError("need 0 < q_lo < q_hi < 1");
  // The slide must leave Q inside its middle region and keep |phi| < delta.
  const Rational room = std::min(q_lo, Rational(1 - q_hi));
  if (!(sgn(delta) > 0 && delta < room))
    throw PreconditionError("delta must lie in (0, " + q_str(room) + ") so that Q sits in the middle region");
  if (!(sgn(amp) > 0 && amp < delta))
    throw PreconditionError("zig-zag amplitude " + q_str(amp) + " needs delta > " + q_str(amp));
  if (sgn(margin) <= 0) throw PreconditionError("margin must be positive");

  const RBox Q = cube_box(d, q_lo, q_hi);
  const Rational lamP = Q.volume();
  const Rational rho = 1, lip = 1;  // identity base: distortion 1, Lipschitz constant 1
  const AreaReport base = graph_area_pa(HomeoExpr::identity(d), Q);

  ExperimentResult r;
  r.series.columns = {{"C", true},          {"slope_bound", true}, {"slope", true},
                      {"area", false},      {"area_lower", false}, {"area_upper", false},
                      {"cells", true},      {"exceeds", true}};
  for (const Rational& C : targets) {
    Rational bound = 0, slope = 0;
    AreaReport rep;
    if (C < base.lower) {
      rep = base;
    } else {
      bound = (C / lamP + lip) / rho;
      slope = bound + margin;
      const HomeoExpr g = HomeoExpr::slide(triangle_wave(slope, amp), delta, d);
      rep = graph_area_pa(g, Q);
    }
    const bool ok = rep.lower > C;
    r.series.rows.push_back({q_str(C), q_str(bound), q_str(slope), d_str(rep.area), d_str(to_double(rep.lower)),
                             d_str(to_double(rep.upper)), std::to_string(rep.cells), b_str(ok)});
    if (!ok) r.fail("area " + d_str(rep.area) + " does not exceed C = " + q_str(C));
  }
  r.summary = {{"base_area", to_double(base.lower)}, {"lambda_P", q_str(lamP)}, {"rho", 1}, {"lipschitz", 1}};
  r.plot = PlotSpec{"Certified graph area against the target", "C", "area", "C", {"area", "C"}, true, "", ""};
  return r;
}

// ---------------------------------------------------------------------------

ExperimentResult twist_infinite_area(const Config& cfg, const RunOptions&) {
  const Params P(cfg);
  const int d = static_cast<int>(P.count("d", 2));
  const unsigned n_max = P.count("n_max", 1);
  const unsigned stages = P.count("stages", 1);
  const SSequence s = SSequence::parse(P.str("s"));
  if (n_max > 12) throw PreconditionError("n_max above 12 is too expensive for exact enumeration");

  // The zig-zag is built for 4 s_n and then scaled by 1/4 so that the
  // offset stays in [0, 1/4] while its oscillation is at least s_n.
  const SSequence s4(s.name() + "*4", [s](unsigned n) { return Rational(s.log2(n) + 2); });
  auto zig = std::make_shared<Zigzag>(s4, stages);
  const Rational quarter(1, 4);
  const HomeoExpr phi_map = HomeoExpr::slide(zig->top().scaled(quarter), quarter, Rational(1, 2), d);

  RBox T = RBox::unit(d);
  T.lo[0] = quarter;
  T.hi[0] = Rational(1, 2);
  MassOptions mo;
  mo.density = [zig, quarter](const Interval& I) { return zig->top_pushforward(I).scaled(quarter); };
  mo.q = [zig](unsigned n) { return zig->q(n); };
  mo.allow_mc = false;
  const MassReport rep = mass_distribution_lower(phi_map, T, 1, n_max, mo);

  ExperimentResult r;
  r.series.columns = {{"n", true},         {"rung", true},     {"q_n", true},       {"max_mass", true},
                      {"limit", true},     {"bound_ok", true}, {"lower_sup", false}, {"lower_euclid", false},
                      {"lower_valid", false}};
  std::vector<std::pair<unsigned, double>> rung_starts;
  for (const MassRow& row : rep.rows) {
    const int m = zig->rung(row.n);
    const Rational limit = *row.q * pow2(-static_cast<long>(row.n) * d);
    r.series.rows.push_back({std::to_string(row.n), std::to_string(m), q_str(*row.q), q_str(*row.max_mass_exact),
                             q_str(limit), b_str(row.bound_ok), d_str(row.lower_sup), d_str(row.lower_euclid),
                             d_str(row.lower_valid)});
    if (!row.bound_ok)
      r.fail("box bound fails at n = " + std::to_string(row.n) + ": max mass " + q_str(*row.max_mass_exact) +
             " > " + q_str(limit));
    if (m >= 0 && zig->a(static_cast<unsigned>(m)) == row.n) rung_starts.emplace_back(row.n, row.lower_sup);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rung_starts.size(); ++i)
    monotone = monotone && rung_starts[i].second >= rung_starts[i - 1].second;
  if (!monotone) r.fail("lower bound is not monotone across the a_m rungs");

  nlohmann::json a = nlohmann::json::array();
  for (unsigned m = 0; m <= stages; ++m) a.push_back(zig->a(m));
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& [n, v] : rung_starts) rs.push_back({{"n", n}, {"lower_sup", v}});
  r.summary = {{"mode", rep.mode},
               {"norm", rep.norm},
               {"total_mass", q_str(rep.total_mass)},
               {"a", a},
               {"best_lower", rep.lower},
               {"best_scale", rep.best_scale},
               {"violations", rep.violations},
               {"rung_lower_bounds", rs},
               {"breakpoints", zig->top().size()}};
  r.plot = PlotSpec{"Mass-distribution lower bound per scale", "n", "lower bound", "n", {"lower_sup", "lower_valid"}, false, "", ""};
  return r;
}

// ---------------------------------------------------------------------------

ExperimentResult nowhere_diff(const Config& cfg, const RunOptions& opt) {
  const Params P(cfg);
  const int d = static_cast<int>(P.count("d", 2));
  const SSequence s = SSequence::parse(P.str("s"));
  const Rational eps = P.rational("eps");
  const unsigned stages = P.count("stages", 1);
  const unsigned span = P.count("span");
  const unsigned probes = P.count("probes", 1);
  const bool control = P.flag("control");
  const std::uint64_t seed = need_seed(opt, "nowhere-diff");

  const NowhereTwist tw = build_nowhere_twist(s, eps, stages, d, span);
  const HomeoExpr e = control ? HomeoExpr::identity(d) : tw.expr;

  // Probe 0 sits on the axis of the cylinder; the rest are seeded.
  std::vector<Point> pts;
  pts.push_back(Point(d, 0.5));
  for (unsigned i = 1; i < probes; ++i) {
    SplitMix64 rng = SplitMix64::split(seed, i);
    Point x(d);
    for (auto& v : x) v = rng.uniform();
    pts.push_back(x);
  }
  auto profiles = parallel_map(pts.size(), opt.jobs, [&](std::size_t i) {
    return diff_quotient_profile(e, pts[i], tw.N, tw.n_hi, ProbeFrame::Cylinder);
  });

  ExperimentResult r;
  r.series.columns = {{"probe", true}, {"n", true}, {"quotient", false}, {"distance", false},
                      {"threshold", false}, {"ok", false}};
  for (int i = 0; i < d; ++i) r.series.columns.push_back({"x" + std::to_string(i + 1), false});
  double worst = INFINITY;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (const ProfileRow& row : profiles[i]) {
      const double thr = s.value(row.n) * std::ldexp(1.0, static_cast<int>(row.n));
      const bool ok = row.quotient >= thr * (1 - 1e-12);
      std::vector<std::string> line{std::to_string(i), std::to_string(row.n), d_str(row.quotient),
                                    d_str(row.distance), d_str(thr), b_str(ok)};
      for (double v : pts[i]) line.push_back(d_str(v));
      r.series.rows.push_back(std::move(line));
      worst = std::min(worst, row.quotient / thr);
      if (!control && !ok)
        r.fail("probe " + std::to_string(i) + " at n = " + std::to_string(row.n) + ": quotient " +
               d_str(row.quotient) + " < " + d_str(thr));
    }
  }
  if (control) {
    double spread = 0;
    for (const auto& prof : profiles)
      for (const auto& row : prof) spread = std::max(spread, std::abs(row.quotient - 1));
    if (spread > 1e-9) r.fail("identity control does not give a flat profile");
    r.summary["control_spread"] = spread;
  }
  r.summary.update({{"N", tw.N},
                    {"n_hi", tw.n_hi},
                    {"eps", q_str(eps)},
                    {"min_ratio_to_threshold", worst},
                    {"phi_breakpoints", tw.phi.size()},
                    {"control", control}});
  r.plot = PlotSpec{"Axis probe: difference quotient against s_n 2^n", "n", "quotient", "n",
                    {"quotient", "threshold"}, true, "probe", "0"};
  return r;
}

// ---------------------------------------------------------------------------

HomeoExpr singular_product(unsigned stage, int d) {
  const PLFunc f = strongly_singular_1d(stage);
  return HomeoExpr::product(std::vector<PLFunc>(static_cast<std::size_t>(d), f));
}

ExperimentResult singular_prevalence(const Config& cfg, const RunOptions& opt) {
  const Params P(cfg);
  const int d = static_cast<int>(P.count("d", 1));
  const unsigned stage = P.count("stage");
  const unsigned samples = P.count("samples");
  const unsigned k = P.count("k", 1);
  const Rational eps_q = P.rational("eps");
  const auto scan = parse_unsigned_list(P.str("scan"));
  const bool control = P.flag("control");
  const std::uint64_t seed = need_seed(opt, "singular-prevalence");
  if (!(sgn(eps_q) > 0 && eps_q < 1)) throw PreconditionError("eps must lie in (0,1)");
  const double eps = to_double(eps_q);

  ExperimentResult r;
  r.series.columns = {{"kind", true}, {"index", true}, {"seed", true}, {"stage", true},
                      {"s", false},   {"t", false},    {"score", true}};

  // Baseline scan over the stage of the singular factor.
  auto scan_scores = parallel_map(scan.size(), opt.jobs, [&](std::size_t i) {
    const HomeoExpr f = control ? HomeoExpr::identity(d) : singular_product(scan[i], d);
    return singularity_score(pushforward_hist(f, k), eps);
  });
  for (std::size_t i = 0; i < scan.size(); ++i) {
    r.series.rows.push_back({"scan", std::to_string(i), "", std::to_string(scan[i]), "", "", d_str(scan_scores[i])});
    // Non-increasing: once the stage is finer than the histogram the score stalls.
    if (!control && i > 0 && scan_scores[i] > scan_scores[i - 1])
      r.fail("score increased from stage " + std::to_string(scan[i - 1]) + " to " + std::to_string(scan[i]));
  }
  if (!control && scan.size() > 1 && !(scan_scores.back() < scan_scores.front()))
    r.fail("score did not decrease over the scan");

  const HomeoExpr f0 = control ? HomeoExpr::identity(d) : singular_product(stage, d);
  const double baseline = singularity_score(pushforward_hist(f0, k), eps);
  r.series.rows.push_back({"baseline", "0", "", std::to_string(stage), "", "", d_str(baseline)});

  // Witness i uses seed + i.
  struct W {
    Point s, t;
    double score;
  };
  auto ws = parallel_map(samples, opt.jobs, [&](std::size_t i) {
    const WitnessSample w = sample_witness(f0, seed + i);
    return W{w.s, w.t, singularity_score(pushforward_hist(w.expr, k), eps)};
  });
  std::vector<double> scores;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    auto join = [](const Point& p) {
      std::string out;
      for (std::size_t j = 0; j < p.size(); ++j) out += (j ? " " : "") + format_double(p[j]);
      return out;
    };
    r.series.rows.push_back({"witness", std::to_string(i), std::to_string(seed + i), std::to_string(stage),
                             join(ws[i].s), join(ws[i].t), d_str(ws[i].score)});
    scores.push_back(ws[i].score);
  }
  nlohmann::json summ{{"baseline", baseline}, {"eps", q_str(eps_q)}, {"k", k}, {"control", control}};
  if (!scores.empty()) {
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                            : (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]) / 2;
    summ["witness_min"] = sorted.front();
    summ["witness_median"] = median;
    summ["witness_max"] = sorted.back();
    summ["distortion_band"] = {sorted.front() / baseline, sorted.back() / baseline};
  }
  nlohmann::json sj = nlohmann::json::array();
  for (std::size_t i = 0; i < scan.size(); ++i) sj.push_back({{"stage", scan[i]}, {"score", scan_scores[i]}});
  summ["scan"] = sj;
  r.summary = summ;
  r.plot = PlotSpec{"Singularity score against the stage", "stage", "score", "stage", {"score"}, true, "kind", "scan"};
  return r;
}

// ---------------------------------------------------------------------------

struct SlideParts {
  PLFunc phi = PLFunc::constant(0);
  Rational delta_lo, delta_hi;
  std::vector<PLFunc> diag;  // inner diagonal factors
};

SlideParts split_base(const HomeoExpr& e, const Rational& delta) {
  const int d = e.dim();
  SlideParts out;
  out.delta_lo = out.delta_hi = delta;
  out.diag.assign(static_cast<std::size_t>(d), PLFunc::identity());
  auto take_diag = [&](const HomeoExpr& x) {
    if (std::holds_alternative<IdentityNode>(x.node().v)) return true;
    if (const auto* p = std::get_if<Product1DNode>(&x.node().v)) {
      for (int i = 0; i < d; ++i) out.diag[i] = *p->f[i];
      return true;
    }
    return false;
  };
  auto take_slide = [&](const HomeoExpr& x) {
    if (const auto* s = std::get_if<SlideNode>(&x.node().v)) {
      out.phi = *s->phi;
      out.delta_lo = s->delta_lo;
      out.delta_hi = s->delta_hi;
      return true;
    }
    return false;
  };
  if (take_slide(e) || take_diag(e)) return out;
  if (const auto* c = std::get_if<ComposeNode>(&e.node().v))
    if (take_slide(c->outer) && take_diag(c->inner)) return out;
  throw UnsupportedExpression("semicontinuity base must be a slide, a product, or a slide after a product");
}

PLFunc random_pl(SplitMix64& rng, const Rational& eps, unsigned knots) {
  std::vector<Rational> xs{Rational(0)}, ys;
  for (unsigned j = 1; j < knots; ++j) {
    xs.emplace_back(j, knots);
    xs.back().canonicalize();
  }
  xs.push_back(Rational(1));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    Rational u(static_cast<long>(rng.next() >> 44), 1L << 20);  // exact dyadic in [0,1)
    u.canonicalize();
    ys.push_back(eps * (2 * u - 1));
  }
  return PLFunc(std::move(xs), std::move(ys));
}

// Monotone PL map with f(0)=0, f(1)=1 and |f - id| <= eps.
PLFunc random_near_identity(SplitMix64& rng, const Rational& eps, unsigned knots) {
  const Rational h(1, knots);
  const Rational shift = std::min(eps, Rational(h / 4));
  std::vector<Rational> xs{Rational(0)}, ys{Rational(0)};
  for (unsigned j = 1; j < knots; ++j) {
    Rational u(static_cast<long>(rng.next() >> 44), 1L << 20);
    u.canonicalize();
    xs.push_back(h * j);
    ys.push_back(h * j + shift * (2 * u - 1));
  }
  xs.push_back(Rational(1));
  ys.push_back(Rational(1));
  return PLFunc(std::move(xs), std::move(ys));
}

PLFunc add_pl(const PLFunc& a, const PLFunc& b) {
  std::vector<Rational> xs(a.xs());
  xs.insert(xs.end(), b.xs().begin(), b.xs().end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<Rational> ys;
  for (const auto& x : xs) ys.push_back(a.eval(x) + b.eval(x));
  return PLFunc(std::move(xs), std::move(ys));
}

ExperimentResult semicontinuity(const Config& cfg, const RunOptions& opt) {
  const Params P(cfg);
  const HomeoExpr base = parse_expr(P.str("base"));
  const int d = base.dim();
  const Rational C = P.rational("C");
  const Rational q_lo = P.rational("q_lo"), q_hi = P.rational("q_hi");
  const Rational eps = P.rational("eps");
  const unsigned trials = P.count("trials");
  const std::uint64_t seed = need_seed(opt, "semicontinuity");
  if (d < 2) throw PreconditionError("semicontinuity needs d >= 2");
  if (sgn(eps) < 0) throw PreconditionError("eps must be nonnegative");

  const SlideParts parts = split_base(base, P.rational("delta"));
  const RBox Q = cube_box(d, q_lo, q_hi);
  const AreaReport base_area = graph_area_pa(base, Q);
  if (!(base_area.lower > C))
    throw PreconditionError("base graph area " + d_str(base_area.area) + " does not exceed C = " + q_str(C));

  auto build = [&](const PLFunc& psi, const std::vector<PLFunc>& inner) {
    std::vector<PLFunc> diag;
    for (int i = 0; i < d; ++i) diag.push_back(compose(parts.diag[i], inner[i]));
    return HomeoExpr::compose(HomeoExpr::slide(add_pl(parts.phi, psi), parts.delta_lo, parts.delta_hi, d),
                              HomeoExpr::product(std::move(diag)));
  };
  const std::vector<PLFunc> ids(static_cast<std::size_t>(d), PLFunc::identity());

  struct Trial {
    std::string kind;
    AreaReport area;
  };
  // Trial 0 is the unperturbed map, trial 1 the adversarial flattening, the rest random.
  auto results = parallel_map(trials + 2, opt.jobs, [&](std::size_t i) -> Trial {
    if (i == 0) return {"zero", graph_area_pa(build(PLFunc::constant(0), ids), Q)};
    if (i == 1) {
      const PLFunc flatten = clamp_pl(parts.phi.scaled(-1), -eps, eps);
      return {"flatten", graph_area_pa(build(flatten, ids), Q)};
    }
    SplitMix64 rng = SplitMix64::split(seed, i);
    const PLFunc psi = sgn(eps) == 0 ? PLFunc::constant(0) : random_pl(rng, eps, 16);
    std::vector<PLFunc> inner;
    for (int j = 0; j < d; ++j)
      inner.push_back(sgn(eps) == 0 ? PLFunc::identity() : random_near_identity(rng, eps, 16));
    return {"random", graph_area_pa(build(psi, inner), Q)};
  });

  ExperimentResult r;
  r.series.columns = {{"trial", true}, {"kind", true}, {"area", false}, {"area_lower", false}, {"above_C", true}};
  double min_area = INFINITY;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& t = results[i];
    const bool ok = t.area.lower > C;
    r.series.rows.push_back({std::to_string(i), t.kind, d_str(t.area.area), d_str(to_double(t.area.lower)), b_str(ok)});
    min_area = std::min(min_area, t.area.area);
    if (!ok) r.fail("trial " + std::to_string(i) + " (" + t.kind + ") has area " + d_str(t.area.area) + " <= C");
  }
  r.summary = {{"base_area", base_area.area},
               {"C", q_str(C)},
               {"eps", q_str(eps)},
               {"min_area", min_area},
               {"min_deficit", base_area.area - min_area},
               {"deficit_over_eps", sgn(eps) > 0 ? (base_area.area - min_area) / to_double(eps) : 0.0}};
  r.plot = PlotSpec{"Graph area under perturbation", "trial", "area", "trial", {"area"}, false, "", ""};
  return r;
}

// ---------------------------------------------------------------------------
// SVG rendering.

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::vector<Rational> parse_rational_list(const std::string& text) {
  std::vector<Rational> out;
  for (const auto& item : split_list(text)) out.push_back(parse_rational(item));
  if (out.empty()) throw ParseError("empty list '" + text + "'");
  return out;
}

std::vector<unsigned> parse_unsigned_list(const std::string& text) {
  std::vector<unsigned> out;
  for (const auto& q : parse_rational_list(text)) {
    if (q.get_den() != 1 || sgn(q) < 0 || q > 1000000) throw ParseError("expected nonnegative integers in '" + text + "'");
    out.push_back(static_cast<unsigned>(q.get_num().get_ui()));
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Series::csv() const {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + cell(columns[i].name);
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell(row[i]);
    out += "\n";
  }
  return out;
}

std::size_t Series::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == name) return i;
  throw PreconditionError("no column '" + name + "'");
}

double Series::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(column(name)));
}

std::string render_svg(const Series& s, const PlotSpec& p) {
  const double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  const std::size_t xc = s.column(p.x_column);
  const std::size_t gc = p.group_column.empty() ? 0 : s.column(p.group_column);
  struct Line {
    std::string name;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Line> lines;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& name : p.y_columns) {
    Line ln{name, {}};
    const std::size_t yc = s.column(name);
    for (const auto& row : s.rows) {
      if (!p.group_column.empty() && row[gc] != p.group_value) continue;
      if (row[xc].empty() || row[yc].empty()) continue;
      double x, y;
      try {
        x = to_double(parse_rational(row[xc]));
      } catch (const ParseError&) {
        x = std::stod(row[xc]);
      }
      try {
        y = to_double(parse_rational(row[yc]));
      } catch (const ParseError&) {
        y = std::stod(row[yc]);
      }
      if (p.log_y) {
        if (!(y > 0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      ln.pts.emplace_back(x, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    lines.push_back(std::move(ln));
  }
  if (!(x1 > x0)) x1 = x0 + 1, x0 -= 1;
  if (!(y1 > y0)) y1 = y0 + 1, y0 -= 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << esc(p.title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", xv);
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << buf
      << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", p.log_y ? std::pow(10.0, yv) : yv);
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << buf
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
    << esc(p.x) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << esc(p.y) << (p.log_y ? " (log scale)" : "") << "</text>\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const char* col = colors[i % 4];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : lines[i].pts) o << px(x) << "," << py(y) << " ";
    o << "\"/>\n";
    for (const auto& [x, y] : lines[i].pts)
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"" << col << "\"/>\n";
    o << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (i + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
      << col << "\">" << esc(lines[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

ExperimentResult run_experiment(const std::string& name, const Config& overrides, const RunOptions& opt) {
  const ExperimentInfo& info = experiment_info(name);
  const Config cfg = resolve_config(info, overrides);
  ExperimentResult r;
  if (name == "banach-mycielski") r = banach_mycielski(cfg, opt);
  else if (name == "generic-area") r = generic_area(cfg, opt);
  else if (name == "twist-infinite-area") r = twist_infinite_area(cfg, opt);
  else if (name == "nowhere-diff") r = nowhere_diff(cfg, opt);
  else if (name == "singular-prevalence") r = singular_prevalence(cfg, opt);
  else r = semicontinuity(cfg, opt);
  r.name = info.name;
  r.claim = info.claim;
  r.config = cfg;
  r.seed = opt.seed;
  return r;
}

nlohmann::json run_document(const ExperimentResult& r) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : r.series.columns) cols.push_back({{"name", c.name}, {"exact", c.exact}});
  const std::string csv = r.series.csv();
  nlohmann::json doc{{"kind", "run"},
                     {"experiment", r.name},
                     {"claim", r.claim},
                     {"config", r.config},
                     {"seed", r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr)},
                     {"passed", r.passed},
                     {"failures", r.failures},
                     {"columns", cols},
                     {"rows", r.series.rows.size()},
                     {"series_sha1", git_blob_sha1(csv)},
                     {"summary", r.summary}};
  // Hash of everything above, so two runs can be compared by one id.
  doc["content_sha1"] = git_blob_sha1(doc.dump());
  return doc;
}

void write_run_files(const ExperimentResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  write_atomic((base / "series.csv").string(), r.series.csv());
  if (r.plot) write_atomic((base / "plot.svg").string(), render_svg(r.series, *r.plot));
  write_atomic((base / "run.json").string(), dump(run_document(r)));
}

}  // namespace singhom
