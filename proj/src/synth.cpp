// SPDX-License-Identifier: Apache-2.0
#include "distad/synth.hpp"

#include <cmath>
#include <numbers>

#include "distad/error.hpp"
#include "distad/random.hpp"
#include "distad/special.hpp"

namespace distad {

namespace {

enum Stream : std::uint64_t { kNoise = 1, kMalfunction = 2, kSamples = 3 };

double seasonal_mean(std::size_t t, int period) {
  return std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period));
}

}  // namespace

void SynthConfig::validate() const {
  if (period <= 0 || learn_length == 0 || detect_length == 0 || quantile_count == 0) {
    throw InvalidArgument("SynthConfig: lengths must be positive");
  }
  if (!(anomaly_prob > 0.0 && anomaly_prob < 1.0)) {
    throw InvalidArgument("SynthConfig: anomaly probability must lie in (0, 1)");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(mu_shift) || !(sigma_drop >= 0.0)) {
    throw InvalidArgument("SynthConfig: invalid noise or malfunction size");
  }
  if (samples_per_interval && *samples_per_interval == 0) {
    throw InvalidArgument("SynthConfig: samples per interval must be positive");
  }
}

LabeledSeries generate(const SynthConfig& config) {
  config.validate();
  Rng noise(derive_seed(config.seed, kNoise));
  Rng faults(derive_seed(config.seed, kMalfunction));
  Rng draws(derive_seed(config.seed, kSamples));

  const std::size_t total = config.learn_length + config.detect_length;
  LabeledSeries s;
  s.learn_length = config.learn_length;
  s.noise_scale = config.noise_scale;
  s.truth.reserve(total);
  s.malfunction.reserve(total);
  const auto levels = PiecewiseLinearCdf::standard_levels(config.quantile_count);
  std::vector<double> std_quantiles(levels.size());
  for (std::size_t j = 0; j < levels.size(); ++j) {
    std_quantiles[j] = special::normal_quantile(levels[j]);
  }

  for (std::size_t t = 0; t < total; ++t) {
    const double eps = noise.normal(0.0, config.noise_scale);
    double mu = seasonal_mean(t, config.period);
    double sigma = 1.0;
    if (config.dynamics == SynthDynamics::ds1) {
      mu += eps;
    } else {
      sigma += eps;
    }
    bool fault = false;
    if (t >= config.learn_length && config.malfunction != Malfunction::none) {
      fault = faults.bernoulli(config.anomaly_prob);
      if (fault && config.malfunction == Malfunction::mu_shift) mu += config.mu_shift;
      if (fault && config.malfunction == Malfunction::sigma_collapse) sigma -= config.sigma_drop;
    }
    if (!(sigma > 0.0)) {
      throw InvalidArgument("generate: non-positive standard deviation at interval " +
                            std::to_string(t));
    }
    s.truth.push_back({mu, sigma, eps});
    s.malfunction.push_back(fault);

    if (config.samples_per_interval) {
      std::vector<double> xs(*config.samples_per_interval);
      for (double& x : xs) x = draws.normal(mu, sigma);
      s.samples.push_back(std::move(xs));
    } else {
      std::vector<double> q(std_quantiles.size());
      for (std::size_t j = 0; j < q.size(); ++j) q[j] = mu + sigma * std_quantiles[j];
      s.quantiles.push_back(std::move(q));
    }
  }
  return s;
}

std::vector<bool> statistical_anomaly_labels(const LabeledSeries& series) {
  const double band = 1.96 * series.noise_scale;
  std::vector<bool> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    out[t] = std::abs(series.truth[t].eps) > band && !series.malfunction[t];
  }
  return out;
}

std::vector<BinnedObservation> to_observations(const LabeledSeries& series, const BinGrid& grid) {
  std::vector<BinnedObservation> out;
  out.reserve(series.size());
  if (series.asymptotic()) {
    const auto levels = PiecewiseLinearCdf::standard_levels(
        series.quantiles.empty() ? 0 : series.quantiles.front().size());
    for (std::size_t t = 0; t < series.quantiles.size(); ++t) {
      const auto cdf = PiecewiseLinearCdf::from_quantiles(grid, levels, series.quantiles[t]);
      out.push_back(cdf_to_probs(cdf, grid, static_cast<std::int64_t>(t)));
    }
  } else {
    for (std::size_t t = 0; t < series.samples.size(); ++t) {
      out.push_back(bin_samples(series.samples[t], grid, static_cast<std::int64_t>(t)));
    }
  }
  return out;
}

std::vector<double> gaussian_bin_probs(const TruthParams& truth, const BinGrid& grid) {
  const auto knots = grid.knots();
  std::vector<double> cum(knots.size());
  cum.front() = 0.0;
  cum.back() = 1.0;
  for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
    cum[k] = special::normal_cdf((knots[k] - truth.mu) / truth.sigma);
  }
  std::vector<double> p(grid.bin_count());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = cum[k + 1] - cum[k];
  return p;
}

std::vector<double> learning_values(const LabeledSeries& series) {
  std::vector<double> out;
  const auto& rows = series.asymptotic() ? series.quantiles : series.samples;
  for (std::size_t t = 0; t < series.learn_length && t < rows.size(); ++t) {
    out.insert(out.end(), rows[t].begin(), rows[t].end());
  }
  return out;
}

PointSeries generate_point_series(const PointSeriesConfig& config) {
  if (config.period <= 0 || config.learn_length == 0 || config.detect_length == 0 ||
      !(config.anomaly_prob > 0.0 && config.anomaly_prob < 1.0) || !(config.noise_scale > 0.0)) {
    throw InvalidArgument("PointSeriesConfig: invalid settings");
  }
  Rng noise(derive_seed(config.seed, kNoise));
  Rng faults(derive_seed(config.seed, kMalfunction));
  PointSeries s;
  s.learn_length = config.learn_length;
  const std::size_t total = config.learn_length + config.detect_length;
  for (std::size_t t = 0; t < total; ++t) {
    double y = seasonal_mean(t, config.period) + noise.normal(0.0, config.noise_scale);
    bool fault = false;
    if (t >= config.learn_length) {
      fault = faults.bernoulli(config.anomaly_prob);
      if (fault) {
        const double sign = faults.bernoulli(0.5) ? 1.0 : -1.0;
        y += sign * config.shift_sigmas * config.noise_scale;
      }
    }
    s.values.push_back(y);
    s.anomaly.push_back(fault);
  }
  return s;
}

std::string scenario_name(SynthDynamics dynamics, Malfunction malfunction) {
  std::string name = dynamics == SynthDynamics::ds1 ? "ds1" : "ds2";
  switch (malfunction) {
    case Malfunction::none:
      return name;
    case Malfunction::mu_shift:
      return name + "-mu";
    case Malfunction::sigma_collapse:
      return name + "-sigma";
  }
  return name;
}

}  // namespace distad
