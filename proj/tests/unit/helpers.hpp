#pragma once

#include <cstdint>
#include <vector>

#include "singhom/interval_fn.hpp"
#include "singhom/rng.hpp"

namespace testing_support {

using singhom::PLFunc;
using singhom::Rational;

// Random strictly increasing PL homeomorphism with dyadic breakpoints.
inline PLFunc random_homeo(singhom::SplitMix64& rng, unsigned knots) {
  std::vector<Rational> xs{Rational(0)}, ys{Rational(0)};
  std::vector<std::uint64_t> a, b;
  for (unsigned i = 0; i + 1 < knots; ++i) {
    a.push_back(1 + (rng.next() >> 44));
    b.push_back(1 + (rng.next() >> 44));
  }
  std::uint64_t sa = 1 + (rng.next() >> 44), sb = 1 + (rng.next() >> 44);
  for (std::size_t i = 0; i < a.size(); ++i) sa += a[i], sb += b[i];
  Rational cx = 0, cy = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Rational dx(static_cast<long>(a[i]), static_cast<long>(sa));
    Rational dy(static_cast<long>(b[i]), static_cast<long>(sb));
    dx.canonicalize();
    dy.canonicalize();
    cx += dx;
    cy += dy;
    xs.push_back(cx);
    ys.push_back(cy);
  }
  xs.push_back(Rational(1));
  ys.push_back(Rational(1));
  return PLFunc(std::move(xs), std::move(ys));
}

}  // namespace testing_support
