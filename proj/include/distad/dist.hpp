// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "distad/grid.hpp"
#include "distad/random.hpp"

namespace distad {

/// Lower bound applied to concentrations produced by the projection layer.
inline constexpr double kAlphaFloor = 1e-6;

/// Dirichlet concentration vector alpha (all components > 0) with cached sum.
class ConcentrationVector {
 public:
  explicit ConcentrationVector(std::vector<double> alpha);

  /// Applies max(raw_i, floor) componentwise before validation.
  static ConcentrationVector floored(std::span<const double> raw, double floor = kAlphaFloor);

  std::span<const double> alpha() const noexcept { return alpha_; }
  double alpha0() const noexcept { return alpha0_; }
  std::size_t size() const noexcept { return alpha_.size(); }
  double operator[](std::size_t i) const noexcept { return alpha_[i]; }

  /// Predictive mean alpha / alpha0.
  std::vector<double> mean() const;

 private:
  std::vector<double> alpha_;
  double alpha0_ = 0.0;
};

enum class LikelihoodKind { dirichlet, dir_mult, categorical };

/// Natural-log likelihood of one observation.
struct LogLikelihood {
  double value;
  LikelihoodKind kind;
};

/// log Dir(p; alpha). `p` must lie on the simplex within 1e-9 (it is then
/// renormalized). A zero p_i contributes 0 when alpha_i == 1 and drives the
/// value to -inf when alpha_i > 1; alpha_i < 1 would be an infinite density
/// and is rejected.
LogLikelihood dirichlet_logpdf(std::span<const double> p, const ConcentrationVector& alpha);

/// log Dir-Mult(m; n, alpha).
LogLikelihood dirmult_logpmf(std::span<const std::uint32_t> m, std::uint64_t n,
                             const ConcentrationVector& alpha);

/// log(alpha_k / alpha0): Dir-Mult with a single trial.
LogLikelihood categorical_logpmf(std::size_t bin, const ConcentrationVector& alpha);

/// Regime-appropriate log-likelihood of a binned observation.
LogLikelihood observation_loglik(const BinnedObservation& obs, const ConcentrationVector& alpha);

std::vector<double> dirichlet_sample(const ConcentrationVector& alpha, Rng& rng);

/// Draws log p for p ~ Dir(alpha) into `log_p`, without underflow for tiny alphas.
void dirichlet_sample_log(const ConcentrationVector& alpha, Rng& rng, std::span<double> log_p);

/// p ~ Dir(alpha), then m ~ Multinomial(n, p).
std::vector<std::uint32_t> dirmult_sample(std::uint64_t n, const ConcentrationVector& alpha,
                                          Rng& rng);

/// d/d alpha of log Dir(p; alpha): psi(alpha0) - psi(alpha_i) + log p_i.
std::vector<double> dirichlet_grad_alpha(std::span<const double> p,
                                         const ConcentrationVector& alpha);

/// d/d alpha of log Dir-Mult(m; n, alpha):
/// psi(alpha0) - psi(n + alpha0) + psi(m_i + alpha_i) - psi(alpha_i).
std::vector<double> dirmult_grad_alpha(std::span<const std::uint32_t> m, std::uint64_t n,
                                       const ConcentrationVector& alpha);

/// Gradient of observation_loglik with respect to alpha.
std::vector<double> grad_alpha(const BinnedObservation& obs, const ConcentrationVector& alpha);

/// Dirichlet log-density with the normalizer precomputed, for scoring many
/// samples against one alpha.
class DirichletScorer {
 public:
  explicit DirichletScorer(const ConcentrationVector& alpha);
  double score_log(std::span<const double> log_p) const;
  double score(std::span<const double> p) const;

 private:
  std::vector<double> alpha_;
  double log_norm_;
};

/// Dir-Mult log-pmf for a fixed (n, alpha). For moderate n the per-bin
/// log Gamma ratios are tabulated once.
class DirMultScorer {
 public:
  DirMultScorer(std::uint64_t n, const ConcentrationVector& alpha);
  double score(std::span<const std::uint32_t> m) const;
  std::uint64_t trials() const noexcept { return n_; }

 private:
  double term(std::size_t bin, std::uint32_t count) const;

  std::uint64_t n_;
  std::vector<double> alpha_;
  double constant_;
  bool tabulated_;
  std::vector<double> table_;  // (n + 1) entries per bin
};

}  // namespace distad
