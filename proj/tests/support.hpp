// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "distad/random.hpp"

namespace distad::testing {

/// Calls f on every count vector of length d summing to n.
inline void for_each_composition(std::uint32_t n, std::size_t d,
                                 const std::function<void(const std::vector<std::uint32_t>&)>& f) {
  std::vector<std::uint32_t> m(d, 0);
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t left) {
    if (i + 1 == d) {
      m[i] = left;
      f(m);
      return;
    }
    for (std::uint32_t c = 0; c <= left; ++c) {
      m[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, n);
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// exp(U(log lo, log hi)).
inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

inline std::vector<double> random_alpha(Rng& rng, std::size_t d, double lo, double hi) {
  std::vector<double> a(d);
  for (double& v : a) v = log_uniform(rng, lo, hi);
  return a;
}

}  // namespace distad::testing
