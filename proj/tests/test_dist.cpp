// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "distad/dist.hpp"
#include "distad/error.hpp"
#include "distad/special.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace distad;
using distad::testing::for_each_composition;

TEST(Special, MatchesKnownValues) {
  EXPECT_NEAR(special::lgamma(0.5), 0.5 * std::log(M_PI), 1e-14);
  EXPECT_NEAR(special::lgamma(10.0), std::log(362880.0), 1e-12);
  EXPECT_NEAR(special::digamma(1.0), -0.57721566490153286, 1e-14);
  EXPECT_NEAR(special::digamma(2.0) - special::digamma(1.0), 1.0, 1e-14);
  EXPECT_NEAR(special::log_factorial(5), std::log(120.0), 1e-14);
  EXPECT_NEAR(special::normal_cdf(1.959963984540054), 0.975, 1e-12);
  EXPECT_NEAR(special::normal_quantile(0.975), 1.959963984540054, 1e-10);
}

TEST(Concentration, Validation) {
  EXPECT_THROW(ConcentrationVector({1.0}), InvalidArgument);
  EXPECT_THROW(ConcentrationVector({1.0, 0.0}), InvalidArgument);
  EXPECT_THROW(ConcentrationVector({1.0, -2.0}), InvalidArgument);
  EXPECT_THROW(ConcentrationVector({1.0, INFINITY}), InvalidArgument);
  const auto f = ConcentrationVector::floored(std::vector<double>{0.0, 2.0});
  EXPECT_EQ(f[0], kAlphaFloor);
  EXPECT_NEAR(f.alpha0(), 2.0 + kAlphaFloor, 1e-15);
}

TEST(Dirichlet, Examples) {
  EXPECT_NEAR(dirichlet_logpdf(std::vector<double>{0.5, 0.5}, ConcentrationVector({1, 1})).value, 0.0, 1e-15);
  // Oracle: log(Gamma(4) / (Gamma(2) Gamma(2)) * 0.2 * 0.8) = log 0.96
  const auto l = dirichlet_logpdf(std::vector<double>{0.2, 0.8}, ConcentrationVector({2, 2}));
  EXPECT_NEAR(l.value, -0.040821994520255166, 1e-13);
  EXPECT_EQ(l.kind, LikelihoodKind::dirichlet);
  EXPECT_EQ(dirichlet_logpdf(std::vector<double>{0.0, 1.0}, ConcentrationVector({3, 1})).value,
            -std::numeric_limits<double>::infinity());
}

TEST(Dirichlet, ZeroComponentRules) {
  // alpha_i == 1 contributes nothing
  EXPECT_NEAR(dirichlet_logpdf(std::vector<double>{0.0, 1.0}, ConcentrationVector({1, 2})).value, std::log(2.0),
              1e-14);
  EXPECT_THROW(dirichlet_logpdf(std::vector<double>{0.0, 1.0}, ConcentrationVector({0.5, 2})), InvalidArgument);
}

TEST(Dirichlet, SimplexGuard) {
  const ConcentrationVector a({2, 2});
  EXPECT_NO_THROW(dirichlet_logpdf(std::vector<double>{0.3, 0.7 + 5e-10}, a));
  EXPECT_THROW(dirichlet_logpdf(std::vector<double>{0.3, 0.71}, a), InvalidArgument);
  EXPECT_THROW(dirichlet_logpdf(std::vector<double>{0.3, 0.3, 0.4}, a), InvalidArgument);
  EXPECT_THROW(dirichlet_logpdf(std::vector<double>{-0.1, 1.1}, a), InvalidArgument);
}

TEST(DirMult, Examples) {
  // Oracle: Dir-Mult(2; 1, 1) puts 1/3 on each of (2,0), (1,1), (0,2).
  EXPECT_NEAR(dirmult_logpmf(std::vector<std::uint32_t>{2, 0}, 2, ConcentrationVector({1, 1})).value,
              std::log(1.0 / 3.0), 1e-14);
  EXPECT_NEAR(dirmult_logpmf(std::vector<std::uint32_t>{1, 1}, 2, ConcentrationVector({1, 1})).value,
              std::log(1.0 / 3.0), 1e-14);
  EXPECT_NEAR(dirmult_logpmf(std::vector<std::uint32_t>{1, 0, 0}, 1, ConcentrationVector({7, 2, 1})).value,
              std::log(0.7), 1e-15);
}

TEST(DirMult, FifteenOutcomesSumToOne) {
  const ConcentrationVector a({0.5, 1.5, 2.0});
  double total = 0.0;
  int outcomes = 0;
  for_each_composition(4, 3, [&](const std::vector<std::uint32_t>& m) {
    total += std::exp(dirmult_logpmf(m, 4, a).value);
    ++outcomes;
  });
  EXPECT_EQ(outcomes, 15);
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(DirMult, Validation) {
  const ConcentrationVector a({1, 1});
  EXPECT_THROW(dirmult_logpmf(std::vector<std::uint32_t>{1, 1}, 3, a), InvalidArgument);
  EXPECT_THROW(dirmult_logpmf(std::vector<std::uint32_t>{1, 1, 0}, 2, a), InvalidArgument);
  EXPECT_THROW(dirmult_logpmf(std::vector<std::uint32_t>{0, 0}, 0, a), InvalidArgument);
}

TEST(DirMult, CategoricalReductionIsExact) {
  Rng rng(4);
  for (int r = 0; r < 200; ++r) {
    const std::size_t d = 2 + rng.uniform_index(8);
    const ConcentrationVector a(distad::testing::random_alpha(rng, d, 0.01, 100.0));
    const std::size_t k = rng.uniform_index(d);
    std::vector<std::uint32_t> m(d, 0);
    m[k] = 1;
    EXPECT_EQ(dirmult_logpmf(m, 1, a).value, categorical_logpmf(k, a).value);
  }
}

TEST(DirMult, ScorerMatchesLogPmf) {
  Rng rng(8);
  const ConcentrationVector a(distad::testing::random_alpha(rng, 6, 0.1, 30.0));
  for (std::uint64_t n : {1ull, 7ull, 60ull, 100000ull}) {
    const DirMultScorer scorer(n, a);
    for (int r = 0; r < 20; ++r) {
      const auto m = dirmult_sample(n, a, rng);
      EXPECT_NEAR(scorer.score(m), dirmult_logpmf(m, n, a).value, 1e-9 * std::max(1.0, std::abs(scorer.score(m))));
    }
  }
}

TEST(DirichletScorer, MatchesLogPdf) {
  Rng rng(2);
  const ConcentrationVector a({0.3, 2.0, 7.5, 1.0});
  const DirichletScorer scorer(a);
  for (int r = 0; r < 50; ++r) {
    const auto p = dirichlet_sample(ConcentrationVector({2, 2, 2, 2}), rng);
    EXPECT_NEAR(scorer.score(p), dirichlet_logpdf(p, a).value, 1e-10);
  }
}

TEST(Observation, LoglikDispatch) {
  const ConcentrationVector a({2, 3});
  EXPECT_EQ(observation_loglik(BinnedObservation::finite({1, 2}), a).kind, LikelihoodKind::dir_mult);
  EXPECT_EQ(observation_loglik(BinnedObservation::asymptotic({0.4, 0.6}), a).kind, LikelihoodKind::dirichlet);
  EXPECT_THROW(observation_loglik(BinnedObservation::missing(2), a), InvalidArgument);
}

TEST(Sampling, ConcentrationLimit) {
  Rng rng(1);
  const auto p = dirichlet_sample(ConcentrationVector({1e6, 1e6}), rng);
  EXPECT_NEAR(p[0], 0.5, 0.01);
  EXPECT_NEAR(p[1], 0.5, 0.01);
}

TEST(Sampling, DirichletMeanOracle) {
  Rng rng(2);
  const ConcentrationVector a({2, 3, 5});
  std::vector<double> mean(3, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto p = dirichlet_sample(a, rng);
    for (int k = 0; k < 3; ++k) mean[k] += p[k] / draws;
  }
  EXPECT_NEAR(mean[0], 0.2, 0.01);
  EXPECT_NEAR(mean[1], 0.3, 0.01);
  EXPECT_NEAR(mean[2], 0.5, 0.01);
}

TEST(Sampling, TinyShapesStayOnTheSimplex) {
  Rng rng(3);
  const ConcentrationVector a({1e-3, 1e-4, 2e-3});
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> lp(3);
    dirichlet_sample_log(a, rng, lp);
    double s = 0.0;
    for (double v : lp) {
      ASSERT_TRUE(std::isfinite(v));
      s += std::exp(v);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Sampling, Determinism) {
  Rng a(42), b(42);
  EXPECT_EQ(dirichlet_sample(ConcentrationVector({0.5, 1, 3}), a), dirichlet_sample(ConcentrationVector({0.5, 1, 3}), b));
  EXPECT_EQ(dirmult_sample(9, ConcentrationVector({0.5, 1, 3}), a), dirmult_sample(9, ConcentrationVector({0.5, 1, 3}), b));
}

TEST(Sampling, CategoricalReductionOracle) {
  Rng rng(6);
  const ConcentrationVector a({7, 2, 1});
  std::vector<double> freq(3, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto m = dirmult_sample(1, a, rng);
    for (int k = 0; k < 3; ++k) freq[k] += static_cast<double>(m[k]) / draws;
  }
  EXPECT_NEAR(freq[0], 0.7, 0.01);
  EXPECT_NEAR(freq[1], 0.2, 0.01);
  EXPECT_NEAR(freq[2], 0.1, 0.01);
}

TEST(Sampling, DirMultSumsToN) {
  Rng rng(7);
  for (std::uint64_t n : {1ull, 5ull, 60ull, 1000ull}) {
    const auto m = dirmult_sample(n, ConcentrationVector({0.2, 1, 4, 9}), rng);
    std::uint64_t s = 0;
    for (auto c : m) s += c;
    EXPECT_EQ(s, n);
  }
  EXPECT_THROW(dirmult_sample(0, ConcentrationVector({1, 1}), rng), InvalidArgument);
}

// Merging bins 1 and 2 of Dir(a) gives Dir with their alphas summed.
TEST(Sampling, AggregationProperty) {
  Rng rng(10);
  const ConcentrationVector a({1.5, 2.5, 4.0});
  const int draws = 200000;
  double m = 0.0, v = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto p = dirichlet_sample(a, rng);
    const double q = p[1] + p[2];
    m += q;
    v += q * q;
  }
  m /= draws;
  v = v / draws - m * m;
  // Beta(6.5, 1.5)
  const double A = 6.5, B = 1.5;
  EXPECT_NEAR(m, A / (A + B), 2e-3);
  EXPECT_NEAR(v, A * B / ((A + B) * (A + B) * (A + B + 1)), 1e-3);
}

TEST(Gradient, DigammaRecurrenceExample) {
  const auto g = dirmult_grad_alpha(std::vector<std::uint32_t>{1, 0}, 1, ConcentrationVector({1, 1}));
  EXPECT_NEAR(g[0], 0.5, 1e-14);
  EXPECT_NEAR(g[1], -0.5, 1e-14);
}

TEST(Gradient, SymmetricInputsGiveEqualComponents) {
  const auto g = dirmult_grad_alpha(std::vector<std::uint32_t>{2, 2, 2}, 6, ConcentrationVector({1.3, 1.3, 1.3}));
  EXPECT_DOUBLE_EQ(g[0], g[1]);
  EXPECT_DOUBLE_EQ(g[1], g[2]);
  const auto h = dirichlet_grad_alpha(std::vector<double>{0.25, 0.25, 0.25, 0.25}, ConcentrationVector({2, 2, 2, 2}));
  EXPECT_DOUBLE_EQ(h[0], h[3]);
}

TEST(Gradient, LargeCountsUseDigammaDifference) {
  const ConcentrationVector a({0.7, 3.1});
  const std::vector<std::uint32_t> m{150, 400};
  const auto g = dirmult_grad_alpha(m, 550, a);
  const double h = 1e-6;
  const double fd = (dirmult_logpmf(m, 550, ConcentrationVector({0.7 + h, 3.1})).value -
                     dirmult_logpmf(m, 550, ConcentrationVector({0.7 - h, 3.1})).value) /
                    (2 * h);
  EXPECT_NEAR(g[0], fd, 1e-5 * std::abs(fd));
}

TEST(Gradient, FiniteDifferencesFiveBins) {
  Rng rng(12);
  for (int r = 0; r < 20; ++r) {
    const auto a = distad::testing::random_alpha(rng, 5, 0.2, 8.0);
    const auto m = dirmult_sample(12, ConcentrationVector(a), rng);
    const auto g = dirmult_grad_alpha(m, 12, ConcentrationVector(a));
    for (int i = 0; i < 5; ++i) {
      auto up = a, down = a;
      up[i] += 1e-5;
      down[i] -= 1e-5;
      const double fd =
          (dirmult_logpmf(m, 12, ConcentrationVector(up)).value - dirmult_logpmf(m, 12, ConcentrationVector(down)).value) /
          2e-5;
      EXPECT_LT(distad::testing::rel_error(g[i], fd), 1e-5);
    }
  }
}

TEST(Properties, DirMultNormalizationByEnumeration) {
  const auto r = distad::testing::dirmult_normalization(20);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Properties, GradientsMatchFiniteDifferences) {
  const auto r = distad::testing::dist_gradients(21);
  EXPECT_TRUE(r.pass) << r.detail;
}
