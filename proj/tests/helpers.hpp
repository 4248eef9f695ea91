#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>

#include "btrip/distributions.hpp"
#include "btrip/error.hpp"
#include "btrip/matrix.hpp"

namespace testing {

// Runs f and returns the ErrorCode it threw; fails the test if nothing was thrown.
inline btrip::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const btrip::Error& e) {
    return e.code();
  }
  FAIL("expected a btrip::Error");
  return btrip::ErrorCode::NumericFailure;
}

// A A^T + d I, comfortably SPD.
inline btrip::SymMatrix random_spd(std::size_t d, btrip::Rng& rng) {
  btrip::Matrix a(d, d);
  for (double& v : a.data()) v = rng.normal();
  btrip::SymMatrix s(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += a(i, k) * a(j, k);
      s.set(i, j, acc + (i == j ? static_cast<double>(d) : 0.0));
    }
  }
  return s;
}

inline btrip::Vector random_vector(std::size_t d, btrip::Rng& rng, double scale = 1.0) {
  btrip::Vector v(d);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace testing
