// SPDX-License-Identifier: Apache-2.0
#include "distad/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "distad/error.hpp"
#include "distad/special.hpp"

namespace distad {

namespace {

constexpr double kSimplexTolerance = 1e-9;
constexpr std::uint32_t kRecurrenceLimit = 64;
constexpr std::size_t kMaxTable = 1 << 18;

void check_dims(std::size_t got, const ConcentrationVector& alpha, const char* what) {
  if (got != alpha.size()) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch with alpha");
  }
}

std::uint64_t check_counts(std::span<const std::uint32_t> m, std::uint64_t n) {
  const std::uint64_t total = std::accumulate(m.begin(), m.end(), std::uint64_t{0});
  if (total != n) throw InvalidArgument("dirmult: counts must sum to n");
  if (n == 0) throw InvalidArgument("dirmult: n must be positive");
  return total;
}

// psi(x + m) - psi(x)
double digamma_shift(double x, std::uint64_t m) {
  if (m == 0) return 0.0;
  if (m <= kRecurrenceLimit) {
    double s = 0.0;
    for (std::uint64_t j = 0; j < m; ++j) s += 1.0 / (x + static_cast<double>(j));
    return s;
  }
  return special::digamma(x + static_cast<double>(m)) - special::digamma(x);
}

}  // namespace

ConcentrationVector::ConcentrationVector(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() < 2) throw InvalidArgument("ConcentrationVector: need at least 2 components");
  for (double a : alpha_) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument("ConcentrationVector: components must be positive and finite");
    }
    alpha0_ += a;
  }
}

ConcentrationVector ConcentrationVector::floored(std::span<const double> raw, double floor) {
  std::vector<double> a(raw.begin(), raw.end());
  for (double& v : a) {
    if (std::isnan(v)) throw InvalidArgument("ConcentrationVector: NaN component");
    v = std::max(v, floor);
  }
  return ConcentrationVector(std::move(a));
}

std::vector<double> ConcentrationVector::mean() const {
  std::vector<double> m(alpha_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = alpha_[i] / alpha0_;
  return m;
}

LogLikelihood dirichlet_logpdf(std::span<const double> p, const ConcentrationVector& alpha) {
  check_dims(p.size(), alpha, "dirichlet_logpdf");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("dirichlet_logpdf: p must be finite and non-negative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw InvalidArgument("dirichlet_logpdf: p is off the simplex");
  }
  bool impossible = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0.0) continue;
    if (alpha[i] < 1.0) {
      throw InvalidArgument("dirichlet_logpdf: zero probability where alpha < 1");
    }
    impossible = impossible || alpha[i] > 1.0;
  }
  if (impossible) return {-std::numeric_limits<double>::infinity(), LikelihoodKind::dirichlet};

  double value = special::lgamma(alpha.alpha0());
  for (std::size_t i = 0; i < p.size(); ++i) value -= special::lgamma(alpha[i]);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    value += (alpha[i] - 1.0) * std::log(p[i] / total);
  }
  return {value, LikelihoodKind::dirichlet};
}

LogLikelihood dirmult_logpmf(std::span<const std::uint32_t> m, std::uint64_t n,
                             const ConcentrationVector& alpha) {
  check_dims(m.size(), alpha, "dirmult_logpmf");
  check_counts(m, n);
  const double a0 = alpha.alpha0();
  if (n == 1) {
    const auto hit = static_cast<std::size_t>(std::find(m.begin(), m.end(), 1u) - m.begin());
    return {std::log(alpha[hit] / a0), LikelihoodKind::dir_mult};
  }
  double value = special::log_factorial(n) + special::lgamma(a0) -
                 special::lgamma(static_cast<double>(n) + a0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == 0) continue;
    value += special::lgamma(m[i] + alpha[i]) - special::log_factorial(m[i]) -
             special::lgamma(alpha[i]);
  }
  return {value, LikelihoodKind::dir_mult};
}

LogLikelihood categorical_logpmf(std::size_t bin, const ConcentrationVector& alpha) {
  if (bin >= alpha.size()) throw InvalidArgument("categorical_logpmf: bin out of range");
  return {std::log(alpha[bin] / alpha.alpha0()), LikelihoodKind::categorical};
}

LogLikelihood observation_loglik(const BinnedObservation& obs, const ConcentrationVector& alpha) {
  switch (obs.kind()) {
    case BinnedObservation::Kind::finite:
      return dirmult_logpmf(obs.counts(), obs.sample_count(), alpha);
    case BinnedObservation::Kind::asymptotic:
      return dirichlet_logpdf(obs.probs(), alpha);
    case BinnedObservation::Kind::missing:
      break;
  }
  throw InvalidArgument("observation_loglik: missing observation");
}

void dirichlet_sample_log(const ConcentrationVector& alpha, Rng& rng, std::span<double> log_p) {
  check_dims(log_p.size(), alpha, "dirichlet_sample_log");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    log_p[i] = rng.log_gamma_variate(alpha[i]);
    mx = std::max(mx, log_p[i]);
  }
  double s = 0.0;
  for (double v : log_p) s += std::exp(v - mx);
  const double log_total = mx + std::log(s);
  for (double& v : log_p) v -= log_total;
}

std::vector<double> dirichlet_sample(const ConcentrationVector& alpha, Rng& rng) {
  std::vector<double> p(alpha.size());
  dirichlet_sample_log(alpha, rng, p);
  for (double& v : p) v = std::exp(v);
  return p;
}

std::vector<std::uint32_t> dirmult_sample(std::uint64_t n, const ConcentrationVector& alpha,
                                          Rng& rng) {
  if (n == 0) throw InvalidArgument("dirmult_sample: n must be positive");
  const std::vector<double> p = dirichlet_sample(alpha, rng);
  std::vector<double> cum(p.size());
  std::partial_sum(p.begin(), p.end(), cum.begin());
  std::vector<std::uint32_t> m(p.size(), 0);
  const double total = cum.back();
  for (std::uint64_t j = 0; j < n; ++j) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    ++m[static_cast<std::size_t>(it - cum.begin())];
  }
  return m;
}

std::vector<double> dirichlet_grad_alpha(std::span<const double> p,
                                         const ConcentrationVector& alpha) {
  check_dims(p.size(), alpha, "dirichlet_grad_alpha");
  // Validation and renormalization rules are shared with the density.
  (void)dirichlet_logpdf(p, alpha);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  const double psi0 = special::digamma(alpha.alpha0());
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    g[i] = psi0 - special::digamma(alpha[i]) + std::log(p[i] / total);
  }
  return g;
}

std::vector<double> dirmult_grad_alpha(std::span<const std::uint32_t> m, std::uint64_t n,
                                       const ConcentrationVector& alpha) {
  check_dims(m.size(), alpha, "dirmult_grad_alpha");
  check_counts(m, n);
  const double common = -digamma_shift(alpha.alpha0(), n);
  std::vector<double> g(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) g[i] = common + digamma_shift(alpha[i], m[i]);
  return g;
}

std::vector<double> grad_alpha(const BinnedObservation& obs, const ConcentrationVector& alpha) {
  switch (obs.kind()) {
    case BinnedObservation::Kind::finite:
      return dirmult_grad_alpha(obs.counts(), obs.sample_count(), alpha);
    case BinnedObservation::Kind::asymptotic:
      return dirichlet_grad_alpha(obs.probs(), alpha);
    case BinnedObservation::Kind::missing:
      break;
  }
  throw InvalidArgument("grad_alpha: missing observation");
}

DirichletScorer::DirichletScorer(const ConcentrationVector& alpha)
    : alpha_(alpha.alpha().begin(), alpha.alpha().end()),
      log_norm_(special::lgamma(alpha.alpha0())) {
  for (double a : alpha_) log_norm_ -= special::lgamma(a);
}

double DirichletScorer::score_log(std::span<const double> log_p) const {
  if (log_p.size() != alpha_.size()) throw InvalidArgument("DirichletScorer: dimension mismatch");
  double v = log_norm_;
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    if (alpha_[i] == 1.0) continue;
    v += (alpha_[i] - 1.0) * log_p[i];
  }
  return v;
}

double DirichletScorer::score(std::span<const double> p) const {
  std::vector<double> lp(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) lp[i] = std::log(p[i]);
  return score_log(lp);
}

DirMultScorer::DirMultScorer(std::uint64_t n, const ConcentrationVector& alpha)
    : n_(n), alpha_(alpha.alpha().begin(), alpha.alpha().end()) {
  if (n == 0) throw InvalidArgument("DirMultScorer: n must be positive");
  const double a0 = alpha.alpha0();
  constant_ = special::log_factorial(n) + special::lgamma(a0) -
              special::lgamma(static_cast<double>(n) + a0);
  tabulated_ = n == 1 || (n + 1) * alpha_.size() <= kMaxTable;
  if (n == 1) {
    constant_ = 0.0;
    table_.resize(2 * alpha_.size());
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      table_[2 * i] = 0.0;
      table_[2 * i + 1] = std::log(alpha_[i] / a0);
    }
  } else if (tabulated_) {
    table_.resize((n + 1) * alpha_.size());
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      const double base = special::lgamma(alpha_[i]);
      double* row = table_.data() + i * (n + 1);
      row[0] = 0.0;
      for (std::uint64_t c = 1; c <= n; ++c) {
        row[c] = special::lgamma(static_cast<double>(c) + alpha_[i]) -
                 special::log_factorial(c) - base;
      }
    }
  }
}

double DirMultScorer::term(std::size_t bin, std::uint32_t count) const {
  if (count == 0) return 0.0;
  if (tabulated_) return table_[bin * (n_ + 1) + count];
  return special::lgamma(count + alpha_[bin]) - special::log_factorial(count) -
         special::lgamma(alpha_[bin]);
}

double DirMultScorer::score(std::span<const std::uint32_t> m) const {
  if (m.size() != alpha_.size()) throw InvalidArgument("DirMultScorer: dimension mismatch");
  double v = constant_;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    total += m[i];
    if (m[i] > n_) throw InvalidArgument("DirMultScorer: count exceeds n");
    v += term(i, m[i]);
  }
  if (total != n_) throw InvalidArgument("DirMultScorer: counts must sum to n");
  return v;
}

}  // namespace distad
