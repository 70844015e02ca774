// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "distad/covariates.hpp"
#include "distad/dist.hpp"
#include "distad/dynamics.hpp"
#include "distad/grid.hpp"
#include "distad/random.hpp"

namespace distad {

enum class EtaMethod { exact, monte_carlo };

/// Threshold of the level set {z : L(z) >= eta}, stored on the log scale.
struct LevelSetThreshold {
  double log_eta;
  double epsilon;
  EtaMethod method;
  std::size_t samples = 0;  // M for Monte Carlo, 0 otherwise
};

struct Outcome {
  double loglik;
  double prob;
};

/// Largest eta with P(L >= eta) >= 1 - epsilon over an enumerated outcome
/// space. Outcomes with equal likelihood enter the credible set together.
LevelSetThreshold exact_eta(std::span<const Outcome> outcomes, double epsilon);

/// Predictive regime for Monte Carlo level sets.
struct Regime {
  /// nullopt: Dirichlet over probability vectors; otherwise Dir-Mult(n).
  std::optional<std::uint64_t> trials;
};

/// Log-likelihoods of `samples` draws from the predictive, sorted ascending.
std::vector<double> sample_logliks(const ConcentrationVector& alpha, Regime regime,
                                   std::size_t samples, Rng& rng);

/// eta-hat is the ceil(epsilon * M)-th smallest sampled log-likelihood.
LevelSetThreshold mc_eta(const ConcentrationVector& alpha, Regime regime, double epsilon,
                         std::size_t samples, Rng& rng);

/// Threshold from an already sorted sample of log-likelihoods.
LevelSetThreshold mc_eta_from_sorted(std::span<const double> sorted, double epsilon);

/// Fraction of sorted sample log-likelihoods <= loglik, floored at 1/(M+1).
double mc_p_value(std::span<const double> sorted, double loglik);

struct AnomalyScore {
  std::optional<double> log_p_point;
  std::optional<double> log_p_window;
  double combined = 0.0;
  bool is_anomaly = false;
};

/// Exact single-sample score: p = total mass of bins no more likely than
/// the observed one; flagged iff p < epsilon.
AnomalyScore point_score(const ConcentrationVector& alpha, std::size_t bin, double epsilon);

/// Monte Carlo score of a count vector under Dir-Mult(n, alpha).
AnomalyScore window_score(const ConcentrationVector& alpha, std::span<const std::uint32_t> counts,
                          std::uint64_t n, double epsilon, std::size_t samples, Rng& rng);

/// Monte Carlo score of a directly observed probability vector under Dir(alpha).
AnomalyScore asymptotic_score(const ConcentrationVector& alpha, std::span<const double> p_obs,
                              double epsilon, std::size_t samples, Rng& rng);

// ---------------------------------------------------------------------------
// Detector

enum class DetectMode {
  asymptotic,  // one probability vector per interval
  finite,      // events within intervals, point and window stages
  single,      // one sample per interval, point stage only
};

struct DetectorConfig {
  DetectMode mode = DetectMode::finite;
  double epsilon = 0.05;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  /// Events per intermediate sub-window score; 0 disables the stage.
  std::uint32_t subwindow = 0;

  void validate() const;
  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

enum class Stage { point, subwindow, window, combined };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);

struct ScoreRecord {
  std::int64_t interval_index;
  Stage stage;
  double log_p;
  bool flagged;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

/// Everything needed to continue scoring one metric.
struct DetectorState {
  HiddenState hidden;               // h_t after computing the current predictive
  std::vector<double> last_z;       // most recent realized model input
  std::vector<double> alpha;        // predictive for the open interval
  std::int64_t interval_index = 0;  // open interval
  std::vector<std::uint32_t> counts;
  std::vector<std::uint32_t> sub_counts;
  std::uint32_t sub_index = 0;
  std::optional<double> last_point_log_p;
  /// False until the first interval has been observed; that interval only
  /// provides the initial model input.
  bool primed = true;
  /// Intervals before this one advance the model without emitting scores.
  std::int64_t score_from = 0;
  std::uint64_t grid_fingerprint = 0;
  DetectorConfig config;

  friend bool operator==(const DetectorState&, const DetectorState&) = default;
};

/// Immutable model bundle used for scoring.
struct ScoringModel {
  ModelParams params;
  BinGrid grid;
  CovariateSpec covariates;
};

/// Runs the model over the history (intervals first_interval ..), then opens
/// the next interval.
DetectorState warm_start(const ScoringModel& model, const DetectorConfig& config,
                         std::span<const BinnedObservation> history, std::int64_t first_interval);

/// Fresh detector for a metric whose first interval is `first_interval`;
/// intervals before `score_from` only warm the model up.
DetectorState cold_start(const ScoringModel& model, const DetectorConfig& config,
                         std::int64_t first_interval, std::int64_t score_from);

struct EndOfWindow {};
struct Distribution {
  std::int64_t interval_index;
  std::vector<double> probs;
};
using StreamInput = std::variant<Event, EndOfWindow, Distribution>;

/// Advances the detector by one input and returns the scores it produced.
/// Events are located by timestamp / window; an event past the open interval
/// closes it (and any empty intervals in between) first.
std::vector<ScoreRecord> stream_step(DetectorState& state, const ScoringModel& model,
                                     const StreamInput& input);

/// One interval of recorded data for batch scoring.
struct IntervalData {
  std::int64_t interval_index;
  std::vector<double> values;  // samples in arrival order (finite/single)
  std::vector<double> probs;   // asymptotic
};

/// Scores recorded intervals from a warm state, closing every one of them;
/// identical to replaying to_stream() through stream_step.
std::vector<ScoreRecord> detect_batch(const DetectorState& start, const ScoringModel& model,
                                      std::span<const IntervalData> intervals);

/// Expands recorded intervals into stream inputs; finite and single modes
/// get an EndOfWindow after each interval.
std::vector<StreamInput> to_stream(std::span<const IntervalData> intervals, DetectMode mode,
                                   std::int64_t window_seconds);

/// Versioned binary checkpoint with a CRC32 trailer.
std::vector<std::uint8_t> serialize_state(const DetectorState& state);
DetectorState deserialize_state(std::span<const std::uint8_t> bytes);

void save_state(const DetectorState& state, const std::string& path);
DetectorState load_state(const std::string& path);

}  // namespace distad
