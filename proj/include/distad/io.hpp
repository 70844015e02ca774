// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "distad/covariates.hpp"
#include "distad/detect.hpp"
#include "distad/dynamics.hpp"
#include "distad/grid.hpp"

namespace distad {

/// Everything `train` writes and `detect` needs.
struct ModelBundle {
  BinGrid grid;
  ModelParams params;
  CovariateSpec covariates;
  TrainingConfig training;
  DetectMode mode = DetectMode::finite;
  double train_fraction = 1.0;
  /// Leading intervals of a metric that only warm the detector up (the
  /// learning range of the training data).
  std::uint64_t warmup_intervals = 0;
  double final_nll = 0.0;

  ScoringModel scoring() const { return {params, grid, covariates}; }
};

std::vector<std::uint8_t> serialize_model(const ModelBundle& model);
ModelBundle deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const ModelBundle& model, const std::string& path);
ModelBundle load_model(const std::string& path);

std::string to_string(DetectMode mode);
DetectMode parse_mode(const std::string& name);

/// Epoch seconds from an integer or an RFC 3339 timestamp
/// ("2024-01-31T12:00:00Z", optional fraction, "Z" or "+hh:mm" offset).
std::int64_t parse_timestamp(std::string_view text);

/// Series file: header `timestamp,value` (one sample per row) or
/// `timestamp,q1,...,qK` (one quantile vector per row).
struct SeriesData {
  std::vector<Event> events;                 // sample rows
  std::vector<std::int64_t> timestamps;      // quantile rows
  std::vector<std::vector<double>> quantiles;

  bool has_quantiles() const noexcept { return !quantiles.empty(); }
};

SeriesData read_series(std::istream& in, const std::string& source = "series");
SeriesData read_series_file(const std::string& path);
void write_sample_series(std::ostream& out, std::span<const Event> events);
void write_quantile_series(std::ostream& out, std::span<const std::int64_t> timestamps,
                           const std::vector<std::vector<double>>& quantiles);

/// One line of an event stream: `metric_id,timestamp,value`.
struct MetricEvent {
  std::string metric_id;
  Event event;
};
/// Returns nullopt for blank lines, comments and a header line.
std::optional<MetricEvent> parse_event_line(std::string_view line, std::size_t line_number);

/// Labels file `interval_index,label` with label 0/1 or normal/malfunction.
std::vector<std::pair<std::int64_t, bool>> read_labels(std::istream& in);
void write_labels(std::ostream& out, std::span<const std::pair<std::int64_t, bool>> labels);

struct MetricScore {
  std::string metric_id;
  ScoreRecord record;
};
void write_score_header(std::ostream& out);
void write_score(std::ostream& out, const std::string& metric_id, const ScoreRecord& record);
std::vector<MetricScore> read_scores(std::istream& in);

/// Progress of a streaming `detect` run: input lines consumed, bytes of
/// score output written, and the detector state of every metric seen.
struct StreamCheckpoint {
  std::uint64_t lines_consumed = 0;
  std::uint64_t output_bytes = 0;
  std::vector<std::pair<std::string, DetectorState>> metrics;
};

/// Versioned binary file with a CRC32 trailer; saved by atomic rename.
std::vector<std::uint8_t> serialize_checkpoint(const StreamCheckpoint& checkpoint);
StreamCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const StreamCheckpoint& checkpoint, const std::string& path);
StreamCheckpoint load_checkpoint(const std::string& path);

/// Groups time-ordered samples into intervals of `window_seconds`; empty
/// intervals between the first and last are included.
std::vector<IntervalData> intervals_from_events(std::span<const Event> events,
                                                std::int64_t window_seconds);

/// Quantile rows turned into probability intervals on `grid`.
std::vector<IntervalData> intervals_from_quantiles(const SeriesData& data, const BinGrid& grid,
                                                   std::int64_t window_seconds);

/// Observations (counts, empty intervals missing) of dense intervals.
std::vector<BinnedObservation> observations_from_intervals(std::span<const IntervalData> intervals,
                                                           const BinGrid& grid, bool asymptotic);

}  // namespace distad
