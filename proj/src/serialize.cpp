#include "singhom/serialize.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "overloaded.hpp"
#include "singhom/constructions.hpp"
#include "singhom/zigzag.hpp"

namespace singhom {

namespace {

struct Token {
  enum Kind { Word, Punct, End } kind;
  std::string text;
  std::size_t pos;
};

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '.' ||
         c == '/' || c == '-' || c == '+';
}

std::vector<Token> lex(const std::string& s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(' || c == ')' || c == ',' || c == '=') {
      out.push_back({Token::Punct, std::string(1, c), i});
      ++i;
    } else if (word_char(c)) {
      const std::size_t start = i;
      while (i < s.size() && word_char(s[i])) ++i;
      out.push_back({Token::Word, s.substr(start, i - start), start});
    } else {
      throw ParseError("unexpected character '" + std::string(1, c) + "' at offset " +
                       std::to_string(i));
    }
  }
  out.push_back({Token::End, "", s.size()});
  return out;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : toks_(lex(text)) {}

  HomeoExpr whole_expr() {
    HomeoExpr e = expr();
    expect_end();
    return e;
  }

  PLFunc whole_pl() {
    PLFunc f = pl();
    expect_end();
    return f;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  Token next() { return toks_[i_++]; }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    throw ParseError(what + " at offset " + std::to_string(t.pos) +
                     (t.kind == Token::End ? " (end of input)" : " near '" + t.text + "'"));
  }

  void expect(const char* p) {
    if (peek().kind != Token::Punct || peek().text != p) fail(std::string("expected '") + p + "'");
    ++i_;
  }

  bool accept(const char* p) {
    if (peek().kind == Token::Punct && peek().text == p) {
      ++i_;
      return true;
    }
    return false;
  }

  void expect_end() {
    if (peek().kind != Token::End) fail("trailing input");
  }

  std::string word() {
    if (peek().kind != Token::Word) fail("expected a name or number");
    return next().text;
  }

  Rational rational() {
    const std::string w = word();
    try {
      return parse_rational(w);
    } catch (const ParseError&) {
      --i_;
      fail("expected a rational number");
    }
  }

  double number() { return to_double(rational()); }

  long integer() {
    const Rational q = rational();
    if (q.get_den() != 1 || !q.get_num().fits_slong_p()) {
      --i_;
      fail("expected an integer");
    }
    return q.get_num().get_si();
  }

  unsigned count(long lo = 0) {
    const long v = integer();
    if (v < lo) {
      --i_;
      fail("integer must be at least " + std::to_string(lo));
    }
    return static_cast<unsigned>(v);
  }

  std::string key() {
    const std::string k = word();
    expect("=");
    return k;
  }

  HomeoExpr expr() {
    std::vector<HomeoExpr> terms{term()};
    while (peek().kind == Token::Word && peek().text == "o") {
      ++i_;
      terms.push_back(term());
    }
    HomeoExpr out = terms.back();
    for (std::size_t k = terms.size() - 1; k-- > 0;) out = HomeoExpr::compose(terms[k], out);
    return out;
  }

  HomeoExpr term() {
    if (accept("(")) {
      HomeoExpr e = expr();
      expect(")");
      return e;
    }
    const std::string name = word();
    expect("(");
    if (name == "identity") {
      const unsigned d = count(1);
      expect(")");
      return HomeoExpr::identity(static_cast<int>(d));
    }
    if (name == "powermap") {
      Point s{number()};
      while (accept(",")) s.push_back(number());
      expect(")");
      return HomeoExpr::power_map(std::move(s));
    }
    if (name == "product") {
      std::vector<PLFunc> fs{pl()};
      while (accept(",")) fs.push_back(pl());
      expect(")");
      return HomeoExpr::product(std::move(fs));
    }
    if (name == "inverse") {
      HomeoExpr e = expr();
      expect(")");
      return HomeoExpr::inverse(std::move(e));
    }
    if (name == "slide") {
      std::optional<PLFunc> phi;
      std::optional<Rational> delta, delta_hi;
      unsigned d = 2;
      do {
        const std::string k = key();
        if (k == "phi") phi = pl();
        else if (k == "delta") delta = rational();
        else if (k == "delta_hi") delta_hi = rational();
        else if (k == "d") d = count(2);
        else fail("unknown slide parameter '" + k + "'");
      } while (accept(","));
      expect(")");
      if (!phi || !delta) throw ParseError("slide needs phi= and delta=");
      if (delta_hi) return HomeoExpr::slide(std::move(*phi), *delta, *delta_hi, static_cast<int>(d));
      return HomeoExpr::slide(std::move(*phi), *delta, static_cast<int>(d));
    }
    if (name == "twist") {
      std::optional<std::string> family;
      std::optional<Rational> eps;
      unsigned stages = 3, d = 2, span = 5;
      do {
        const std::string k = key();
        if (k == "s") family = word();
        else if (k == "eps") eps = rational();
        else if (k == "stages") stages = count(1);
        else if (k == "d") d = count(2);
        else if (k == "span") span = count(0);
        else fail("unknown twist parameter '" + k + "'");
      } while (accept(","));
      expect(")");
      if (!family || !eps) throw ParseError("twist needs s= and eps=");
      return build_nowhere_twist(SSequence::parse(*family), *eps, stages, static_cast<int>(d), span).expr;
    }
    if (name == "expand") {
      Point center;
      std::optional<double> r, eta;
      do {
        const std::string k = key();
        if (k == "center") {
          expect("(");
          center.push_back(number());
          while (accept(",")) center.push_back(number());
          expect(")");
        } else if (k == "r") {
          r = number();
        } else if (k == "eta") {
          eta = number();
        } else {
          fail("unknown expand parameter '" + k + "'");
        }
      } while (accept(","));
      expect(")");
      if (center.empty() || !r || !eta) throw ParseError("expand needs center=, r= and eta=");
      return HomeoExpr::radial_expand(std::move(center), *r, *eta);
    }
    --i_;
    --i_;
    fail("unknown map '" + name + "'");
  }

  PLFunc pl() {
    const std::string name = word();
    if (name == "id") return PLFunc::identity();
    expect("(");
    if (name == "pl") {
      std::vector<Rational> xs, ys;
      do {
        expect("(");
        xs.push_back(rational());
        expect(",");
        ys.push_back(rational());
        expect(")");
      } while (accept(","));
      expect(")");
      try {
        return PLFunc(std::move(xs), std::move(ys));
      } catch (const InvariantViolation& err) {
        throw ParseError(std::string("invalid pl(): ") + err.what());
      }
    }
    if (name == "zigzag") {
      const std::string family = word();
      unsigned stages = 3;
      Rational scale = 1;
      while (accept(",")) {
        const std::string k = key();
        if (k == "stages") stages = count(0);
        else if (k == "scale") scale = rational();
        else fail("unknown zigzag parameter '" + k + "'");
      }
      expect(")");
      Zigzag z(SSequence::parse(family), stages);
      return scale == 1 ? z.top() : z.top().scaled(scale);
    }
    if (name == "singular") {
      std::optional<unsigned> stage;
      unsigned p = 3, depth = 2;
      do {
        const std::string k = key();
        if (k == "stage") stage = count(0);
        else if (k == "p") p = count(2);
        else if (k == "depth") depth = count(1);
        else fail("unknown singular parameter '" + k + "'");
      } while (accept(","));
      expect(")");
      if (!stage) throw ParseError("singular needs stage=");
      return strongly_singular_1d(*stage, p, depth);
    }
    if (name == "triwave") {
      std::optional<Rational> slope, amp;
      do {
        const std::string k = key();
        if (k == "slope") slope = rational();
        else if (k == "amp") amp = rational();
        else fail("unknown triwave parameter '" + k + "'");
      } while (accept(","));
      expect(")");
      if (!slope || !amp) throw ParseError("triwave needs slope= and amp=");
      return triangle_wave(*slope, *amp);
    }
    --i_;
    --i_;
    fail("unknown function '" + name + "'");
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name))
    throw ParseError(std::string("missing field '") + name + "'");
  return j.at(name);
}

template <class T>
T get_as(const json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + name + "': " + e.what());
  }
}

json point_json(const Point& p) {
  json a = json::array();
  for (double v : p) a.push_back(v);
  return a;
}

Point point_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Point p;
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError("expected a number");
    p.push_back(v.get<double>());
  }
  return p;
}

}  // namespace

PLFunc parse_pl(const std::string& text) { return Parser(text).whole_pl(); }

HomeoExpr parse_expr(const std::string& text) { return Parser(text).whole_expr(); }

PLFunc triangle_wave(const Rational& slope, const Rational& amp) {
  if (sgn(slope) <= 0 || sgn(amp) <= 0) throw PreconditionError("triwave needs positive slope and amp");
  const Rational quarter = amp / slope;
  std::vector<Rational> xs{Rational(0)}, ys{Rational(0)};
  Rational x = quarter;
  int sign = 1;
  while (x < 1) {
    xs.push_back(x);
    ys.push_back(amp * sign);
    sign = -sign;
    x += 2 * quarter;
  }
  // Finish at x = 1 on the current leg, keeping the slope.
  const Rational dx = 1 - xs.back();
  const Rational leg = xs.size() == 1 ? Rational(slope) : Rational(-slope * (ys.back() / amp));
  ys.push_back(ys.back() + leg * dx);
  xs.push_back(Rational(1));
  return PLFunc(std::move(xs), std::move(ys));
}

PLFunc clamp_pl(const PLFunc& f, const Rational& lo, const Rational& hi) {
  if (lo > hi) throw PreconditionError("clamp bounds out of order");
  const auto& xs = f.xs();
  const auto& ys = f.ys();
  std::vector<Rational> ox, oy;
  auto clamp = [&](const Rational& y) -> Rational { return std::min(hi, std::max(lo, y)); };
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    ox.push_back(xs[i]);
    oy.push_back(clamp(ys[i]));
    std::vector<Rational> cuts;
    for (const Rational& level : {lo, hi}) {
      if ((ys[i] < level && ys[i + 1] > level) || (ys[i] > level && ys[i + 1] < level))
        cuts.push_back(xs[i] + (level - ys[i]) * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i]));
    }
    std::sort(cuts.begin(), cuts.end());
    for (const auto& c : cuts) {
      ox.push_back(c);
      oy.push_back(clamp(f.eval(c)));
    }
  }
  ox.push_back(xs.back());
  oy.push_back(clamp(ys.back()));
  return PLFunc(std::move(ox), std::move(oy));
}

json rational_json(const Rational& q) { return to_string(q); }

Rational rational_from_json(const json& j) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_number()) return from_double(j.get<double>());
  throw ParseError("expected a rational (\"p/q\" string or number)");
}

json to_json(const PLFunc& f) {
  json a = json::array();
  for (std::size_t i = 0; i < f.size(); ++i)
    a.push_back(json::array({rational_json(f.xs()[i]), rational_json(f.ys()[i])}));
  return a;
}

PLFunc plfunc_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("breakpoints must be an array of [x, y] pairs");
  std::vector<Rational> xs, ys;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ParseError("breakpoint must be an [x, y] pair");
    xs.push_back(rational_from_json(p[0]));
    ys.push_back(rational_from_json(p[1]));
  }
  try {
    return PLFunc(std::move(xs), std::move(ys));
  } catch (const InvariantViolation& e) {
    throw ParseError(std::string("invalid breakpoints: ") + e.what());
  }
}

json to_json(const HomeoExpr& e) {
  return std::visit(
      overloaded{
          [](const IdentityNode& n) { return json{{"type", "identity"}, {"d", n.d}}; },
          [](const Product1DNode& n) {
            json fs = json::array();
            for (const auto& f : n.f) fs.push_back(to_json(*f));
            return json{{"type", "product"}, {"factors", fs}};
          },
          [](const PowerMapNode& n) { return json{{"type", "powermap"}, {"s", point_json(n.s)}}; },
          [](const SlideNode& n) {
            return json{{"type", "slide"},
                        {"phi", to_json(*n.phi)},
                        {"delta_lo", rational_json(n.delta_lo)},
                        {"delta_hi", rational_json(n.delta_hi)},
                        {"d", n.d}};
          },
          [](const RadialTwistNode& n) {
            return json{{"type", "twist"}, {"h", to_json(*n.h)}, {"phi", to_json(*n.phi)}, {"d", n.d}};
          },
          [](const RadialExpandNode& n) {
            return json{{"type", "expand"}, {"center", point_json(n.center)}, {"r", n.r}, {"eta", n.eta}};
          },
          [](const ComposeNode& n) {
            return json{{"type", "compose"}, {"outer", to_json(n.outer)}, {"inner", to_json(n.inner)}};
          },
          [](const InverseNode& n) { return json{{"type", "inverse"}, {"inner", to_json(n.inner)}}; },
      },
      e.node().v);
}

HomeoExpr homeo_from_json(const json& j) {
  const std::string type = get_as<std::string>(j, "type");
  try {
    if (type == "identity") return HomeoExpr::identity(get_as<int>(j, "d"));
    if (type == "product") {
      std::vector<PLFunc> fs;
      const json& arr = field(j, "factors");
      if (!arr.is_array()) throw ParseError("factors must be an array");
      for (const auto& f : arr) fs.push_back(plfunc_from_json(f));
      return HomeoExpr::product(std::move(fs));
    }
    if (type == "powermap") return HomeoExpr::power_map(point_from_json(field(j, "s")));
    if (type == "slide")
      return HomeoExpr::slide(plfunc_from_json(field(j, "phi")), rational_from_json(field(j, "delta_lo")),
                              rational_from_json(field(j, "delta_hi")), get_as<int>(j, "d"));
    if (type == "twist")
      return HomeoExpr::radial_twist(plfunc_from_json(field(j, "h")), plfunc_from_json(field(j, "phi")),
                                     get_as<int>(j, "d"));
    if (type == "expand")
      return HomeoExpr::radial_expand(point_from_json(field(j, "center")), get_as<double>(j, "r"),
                                      get_as<double>(j, "eta"));
    if (type == "compose")
      return HomeoExpr::compose(homeo_from_json(field(j, "outer")), homeo_from_json(field(j, "inner")));
    if (type == "inverse") return HomeoExpr::inverse(homeo_from_json(field(j, "inner")));
  } catch (const InvariantViolation& e) {
    throw ParseError("invalid " + type + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw ParseError("invalid " + type + ": " + e.what());
  } catch (const DomainError& e) {
    throw ParseError("invalid " + type + ": " + e.what());
  }
  throw ParseError("unknown map type '" + type + "'");
}

json cantor_json(const CantorScheme& s, unsigned level) {
  json ivs = json::array();
  for (const auto& I : s.elementary_intervals(level))
    ivs.push_back(json::array({rational_json(I.lo), rational_json(I.hi)}));
  json gaps = json::array();
  for (unsigned k = 1; k <= level; ++k) gaps.push_back(rational_json(s.gap_length(k)));
  return json{{"kind", "cantor"},
              {"base", json::array({rational_json(s.base().lo), rational_json(s.base().hi)})},
              {"level", level},
              {"elementary_length", rational_json(s.elementary_length(level))},
              {"gap_lengths", gaps},
              {"elementary", ivs}};
}

json homeo_document(const HomeoExpr& e, const std::string& source) {
  return json{{"kind", "homeo"}, {"dim", e.dim()}, {"expr", to_json(e)}, {"source", source}};
}

json pl_document(const PLFunc& f, const std::string& source) {
  return json{{"kind", "plfunc"},
              {"monotone_homeo", f.monotone_homeo()},
              {"breakpoints", to_json(f)},
              {"source", source}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

std::string git_blob_sha1(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

}  // namespace singhom
