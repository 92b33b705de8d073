#pragma once

// Text expressions, JSON documents and small file utilities.
//
// Expression grammar (whitespace is free):
//   expr  := term ('o' term)*                 right-associative composition
//   term  := identity(D) | powermap(S, ...) | product(PL, ...)
//          | slide(phi=PL, delta=Q [, delta_hi=Q] [, d=D])
//          | twist(s=FAMILY, eps=Q [, stages=M] [, d=D] [, span=K])
//          | expand(center=(X, ...), r=R, eta=E)
//          | inverse(expr) | (expr)
//   PL    := id | pl((x, y), ...) | zigzag(FAMILY [, stages=M] [, scale=Q])
//          | singular(stage=M [, p=P] [, depth=K]) | triwave(slope=Q, amp=Q)
// Q is a rational ("3/8", "0.25" or "2"); FAMILY is an s-sequence name such
// as pow2:3.

#include "json.hpp"
#include <string>

#include "singhom/cantor.hpp"
#include "singhom/homeo.hpp"
#include "singhom/interval_fn.hpp"

namespace singhom {

using json = nlohmann::json;

PLFunc parse_pl(const std::string& text);
HomeoExpr parse_expr(const std::string& text);

// Triangle wave of exact slope +-slope between -amp and amp, starting at 0.
PLFunc triangle_wave(const Rational& slope, const Rational& amp);

// min(hi, max(lo, f)) with the crossing points inserted exactly.
PLFunc clamp_pl(const PLFunc& f, const Rational& lo, const Rational& hi);

json rational_json(const Rational& q);
Rational rational_from_json(const json& j);

json to_json(const PLFunc& f);
PLFunc plfunc_from_json(const json& j);

json to_json(const HomeoExpr& e);
HomeoExpr homeo_from_json(const json& j);

json cantor_json(const CantorScheme& s, unsigned level);

// Top-level documents carry "kind" plus the payload; `source` is the text
// the object was built from (may be empty).
json homeo_document(const HomeoExpr& e, const std::string& source);
json pl_document(const PLFunc& f, const std::string& source);

// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

// Reads and parses a JSON file; failures raise ParseError.
json read_json_file(const std::string& path);

// Writes via a temporary file in the same directory and rename.
void write_atomic(const std::string& path, const std::string& content);

// Git blob id of `content`: sha1("blob <size>\0" + content), lowercase hex.
std::string git_blob_sha1(const std::string& content);

}  // namespace singhom
