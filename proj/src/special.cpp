// SPDX-License-Identifier: Apache-2.0
#include "distad/special.hpp"

#include <array>
#include <cmath>

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "distad/error.hpp"

namespace distad::special {

namespace {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

constexpr std::size_t kFactorialTable = 256;

const std::array<double, kFactorialTable>& factorial_table() {
  static const std::array<double, kFactorialTable> table = [] {
    std::array<double, kFactorialTable> t{};
    t[0] = 0.0;
    for (std::size_t n = 1; n < kFactorialTable; ++n) {
      t[n] = t[n - 1] + std::log(static_cast<double>(n));
    }
    return t;
  }();
  return table;
}

}  // namespace

double lgamma(double x) {
  if (!(x > 0.0)) throw InvalidArgument("lgamma: argument must be positive");
  return boost::math::lgamma(x, Policy());
}

double digamma(double x) {
  if (!(x > 0.0)) throw InvalidArgument("digamma: argument must be positive");
  return boost::math::digamma(x, Policy());
}

double log_factorial(unsigned long long n) {
  if (n < kFactorialTable) return factorial_table()[n];
  return boost::math::lgamma(static_cast<double>(n) + 1.0, Policy());
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must be in (0, 1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p, Policy());
}

}  // namespace distad::special
