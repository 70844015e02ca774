// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace distad::special {

/// log Gamma(x) for x > 0. Reentrant (no signgam side effect).
double lgamma(double x);

/// Digamma psi(x) for x > 0.
double digamma(double x);

/// log(n!)
double log_factorial(unsigned long long n);

/// Standard normal CDF and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace distad::special
