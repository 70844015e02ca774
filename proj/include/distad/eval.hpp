// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "distad/detect.hpp"
#include "distad/dynamics.hpp"
#include "distad/synth.hpp"

namespace distad {

/// Mann-Whitney AUC: probability that a random positive scores above a
/// random negative, ties counted 1/2. Higher score = more anomalous.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

struct RateReport {
  double fpr = 0.0;               // percent of non-malfunction intervals flagged
  std::optional<double> recall;   // percent of malfunction intervals flagged
};

/// Intervals with exclude[i] set are left out of both rates.
RateReport fpr_recall(const std::vector<bool>& flags, const std::vector<bool>& labels,
                      const std::vector<bool>& exclude = {});

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t count = 0;
};

/// Mean and sample standard deviation; values are summed in sorted order.
MeanStd summarize(std::vector<double> values);

// ---------------------------------------------------------------------------
// Synthetic experiments

enum class ObservationRegime { asymptotic, finite };

struct Scenario {
  ObservationRegime regime = ObservationRegime::asymptotic;
  SynthDynamics dynamics = SynthDynamics::ds1;
  Malfunction malfunction = Malfunction::none;

  std::string name() const;
  /// Parses names like "asymp-ds1", "finite-ds2-sigma".
  static Scenario parse(const std::string& name);
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// The six asymptotic and four finite scenarios reported by run_experiment.
std::vector<Scenario> standard_scenarios(ObservationRegime regime);

struct ExperimentConfig {
  std::vector<Scenario> scenarios;
  std::size_t runs = 10;
  std::uint64_t first_seed = 0;
  TrainingConfig training = default_experiment_training();
  double epsilon = 0.05;
  std::size_t mc_samples = 1000;
  std::size_t asymptotic_bins = 30;
  std::size_t finite_bins = 10;
  std::uint32_t samples_per_interval = 60;
  double support_margin = 0.05;
  std::size_t learn_length = 1500;
  std::size_t detect_length = 2000;
  double noise_scale = 0.1;

  static TrainingConfig default_experiment_training();
};

struct RunResult {
  std::uint64_t seed = 0;
  RateReport rates;
  std::optional<double> auc;
  double train_nll = 0.0;
};

struct ScenarioReport {
  Scenario scenario;
  std::vector<RunResult> runs;
  MeanStd fpr;
  std::optional<MeanStd> recall;
  std::optional<MeanStd> auc;
};

/// generate -> grid -> train -> warm start -> detect for one scenario and
/// seed. Models are reused across scenarios whose learning ranges coincide.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig config);

  RunResult run(const Scenario& scenario, std::uint64_t seed);
  ScenarioReport run_scenario(const Scenario& scenario);
  std::vector<ScenarioReport> run_all();

  using Progress = std::function<void(const Scenario&, const RunResult&)>;
  void on_progress(Progress p) { progress_ = std::move(p); }

 private:
  struct CachedModel {
    ObservationRegime regime;
    SynthDynamics dynamics;
    std::uint64_t seed;
    std::uint64_t data_fingerprint;
    TrainResult result;
  };
  const TrainResult& model_for(const Scenario& s, std::uint64_t seed,
                               const TrainingSeries& series);

  ExperimentConfig config_;
  std::vector<CachedModel> cache_;
  Progress progress_;
};

std::vector<ScenarioReport> run_experiment(const ExperimentConfig& config);

/// Human-readable table of the reports.
std::string format_reports(std::span<const ScenarioReport> reports);
/// Structured JSON text of the reports.
std::string reports_to_json(std::span<const ScenarioReport> reports);

// ---------------------------------------------------------------------------
// Single-sample pathway

struct PointExperimentConfig {
  std::size_t runs = 10;
  std::uint64_t first_seed = 0;
  std::size_t bins = 100;
  double support_margin = 0.05;
  PointSeriesConfig series;
  TrainingConfig training;
};

struct PointRunResult {
  std::uint64_t seed = 0;
  double auc = 0.0;
  RateReport rates;
};

/// Exact point scores (no Monte Carlo) on single-observation series with
/// injected shifts; AUC of -log p against the injected labels.
std::vector<PointRunResult> run_point_experiment(const PointExperimentConfig& config);

}  // namespace distad
