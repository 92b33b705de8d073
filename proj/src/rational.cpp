#include "singhom/rational.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace singhom {

Rational pow2(long e) {
  mpz_class p = 1;
  if (e >= 0) {
    mpz_mul_2exp(p.get_mpz_t(), p.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
    return Rational(p);
  }
  mpz_mul_2exp(p.get_mpz_t(), p.get_mpz_t(), static_cast<mp_bitcnt_t>(-e));
  return Rational(mpz_class(1), p);
}

std::string to_string(const Rational& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw ParseError("empty rational literal");
  const auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      mpz_class num(text.substr(0, slash), 10);
      mpz_class den(text.substr(slash + 1), 10);
      if (den == 0) throw ParseError("zero denominator in '" + text + "'");
      Rational r(num, den);
      r.canonicalize();
      return r;
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(mpz_class(text, 10));
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    const std::size_t frac = text.size() - dot - 1;
    if (frac == 0 || digits.empty() || digits == "-" || digits == "+")
      throw ParseError("malformed decimal '" + text + "'");
    for (std::size_t i = 0; i < digits.size(); ++i) {
      const char c = digits[i];
      if (!(std::isdigit(static_cast<unsigned char>(c)) || (i == 0 && (c == '-' || c == '+'))))
        throw ParseError("malformed decimal '" + text + "'");
    }
    if (digits[0] == '+') digits.erase(0, 1);
    mpz_class den = 1;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, frac);
    Rational r(mpz_class(digits, 10), den);
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    throw ParseError("malformed rational '" + text + "'");
  }
}

Rational from_double(double x) {
  if (!std::isfinite(x)) throw DomainError("non-finite value has no rational form");
  Rational r(x);
  return r;
}

double to_double(const Rational& q) {
  // mpq_get_d truncates toward zero; step to the neighbour when it is closer.
  const double t = q.get_d();
  if (!std::isfinite(t) || Rational(t) == q) return t;
  const double away = std::nextafter(t, sgn(q) > 0 ? HUGE_VAL : -HUGE_VAL);
  if (!std::isfinite(away)) return t;
  const Rational dt = abs(q - Rational(t));
  const Rational da = abs(Rational(away) - q);
  if (da < dt) return away;
  if (dt < da) return t;
  std::int64_t bits;
  std::memcpy(&bits, &t, sizeof bits);
  return (bits & 1) ? away : t;
}

namespace {

// floor(sqrt(q) * 2^bits) as an integer, using sqrt(p/q) = sqrt(p*q)/q.
mpz_class scaled_isqrt(const Rational& q, unsigned bits, mpz_class& den_out) {
  mpz_class pq = q.get_num() * q.get_den();
  mpz_mul_2exp(pq.get_mpz_t(), pq.get_mpz_t(), 2 * bits);
  mpz_class root;
  mpz_sqrt(root.get_mpz_t(), pq.get_mpz_t());
  den_out = q.get_den();
  mpz_mul_2exp(den_out.get_mpz_t(), den_out.get_mpz_t(), bits);
  return root;
}

}  // namespace

Rational sqrt_lower(const Rational& q, unsigned bits) {
  if (sgn(q) < 0) throw DomainError("sqrt of negative rational");
  mpz_class den;
  mpz_class root = scaled_isqrt(q, bits, den);
  Rational r(root, den);
  r.canonicalize();
  return r;
}

Rational sqrt_upper(const Rational& q, unsigned bits) {
  if (sgn(q) < 0) throw DomainError("sqrt of negative rational");
  mpz_class den;
  mpz_class root = scaled_isqrt(q, bits, den);
  Rational r(root, den);
  r.canonicalize();
  if (r * r == q) return r;
  Rational up(root + 1, den);
  up.canonicalize();
  return up;
}

long floor_log2(const Rational& q) {
  if (sgn(q) <= 0) throw DomainError("log2 of nonpositive rational");
  long e = static_cast<long>(mpz_sizeinbase(q.get_num().get_mpz_t(), 2)) -
           static_cast<long>(mpz_sizeinbase(q.get_den().get_mpz_t(), 2));
  // 2^e is within a factor 2 of q; adjust.
  while (pow2(e) > q) --e;
  while (pow2(e + 1) <= q) ++e;
  return e;
}

}  // namespace singhom
