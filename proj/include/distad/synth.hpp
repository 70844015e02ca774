// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distad/grid.hpp"

namespace distad {

enum class SynthDynamics { ds1, ds2 };
enum class Malfunction { none, mu_shift, sigma_collapse };

/// Periodic Gaussian benchmark: mu_t = sin(2 pi t / P), sigma_t = 1,
/// eps_t ~ N(0, noise_scale). DS1 perturbs the mean by eps_t, DS2 the
/// standard deviation.
struct SynthConfig {
  SynthDynamics dynamics = SynthDynamics::ds1;
  Malfunction malfunction = Malfunction::none;
  int period = 24;
  std::size_t learn_length = 1500;
  std::size_t detect_length = 2000;
  double anomaly_prob = 0.03;
  /// Samples per interval; nullopt emits quantile vectors instead.
  std::optional<std::uint32_t> samples_per_interval;
  std::size_t quantile_count = 1000;
  double noise_scale = 0.1;
  double mu_shift = 1.0;
  double sigma_drop = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TruthParams {
  double mu;
  double sigma;
  double eps;
};

/// Intervals 0 .. learn_length + detect_length - 1; the first learn_length
/// form the learning range.
struct LabeledSeries {
  /// Raw samples per interval (finite mode).
  std::vector<std::vector<double>> samples;
  /// Quantiles at PiecewiseLinearCdf::standard_levels (asymptotic mode).
  std::vector<std::vector<double>> quantiles;
  std::vector<bool> malfunction;
  std::vector<TruthParams> truth;
  std::size_t learn_length = 0;
  double noise_scale = 0.1;

  std::size_t size() const noexcept { return truth.size(); }
  bool asymptotic() const noexcept { return samples.empty(); }
};

LabeledSeries generate(const SynthConfig& config);

/// Intervals whose noise term is outside its own 95% band (|eps| > 1.96 *
/// noise_scale) and that are not malfunctions.
std::vector<bool> statistical_anomaly_labels(const LabeledSeries& series);

/// Bins every interval on `grid`: counts in finite mode, probabilities of
/// the interpolated quantile CDF in asymptotic mode.
std::vector<BinnedObservation> to_observations(const LabeledSeries& series, const BinGrid& grid);

/// Exact Gaussian bin masses of interval t on `grid`; tail mass beyond the
/// support goes to the edge bins.
std::vector<double> gaussian_bin_probs(const TruthParams& truth, const BinGrid& grid);

/// Values used to place grids: every sample or every quantile in the
/// learning range.
std::vector<double> learning_values(const LabeledSeries& series);

/// Single-observation series (one sample per interval) with point anomalies:
/// y_t = sin(2 pi t / P) + noise_scale * e_t, and in the detection range with
/// probability anomaly_prob the value is shifted by +-shift_sigmas * noise_scale.
struct PointSeriesConfig {
  int period = 24;
  std::size_t learn_length = 1500;
  std::size_t detect_length = 2000;
  double anomaly_prob = 0.03;
  double noise_scale = 0.1;
  double shift_sigmas = 4.0;
  std::uint64_t seed = 0;
};

struct PointSeries {
  std::vector<double> values;
  std::vector<bool> anomaly;
  std::size_t learn_length = 0;
};

PointSeries generate_point_series(const PointSeriesConfig& config);

std::string scenario_name(SynthDynamics dynamics, Malfunction malfunction);

}  // namespace distad
