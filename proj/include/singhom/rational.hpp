#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>

namespace singhom {

using Rational = mpq_class;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct InvariantViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedExpression : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 2^e for any integer e, exact.
Rational pow2(long e);

// Canonical "p/q" form (or "p" when q == 1).
std::string to_string(const Rational& q);

// Accepts "p/q", integers and finite decimals ("0.25", "-3.5e-2" is rejected).
Rational parse_rational(const std::string& text);

// Exact conversion of a finite double.
Rational from_double(double x);

// Correctly rounded (nearest, ties to even).
double to_double(const Rational& q);

// Rigorous rational bounds on sqrt(q) with about `bits` fractional bits.
Rational sqrt_lower(const Rational& q, unsigned bits = 64);
Rational sqrt_upper(const Rational& q, unsigned bits = 64);

// floor(log2(q)) for q > 0.
long floor_log2(const Rational& q);

}  // namespace singhom
