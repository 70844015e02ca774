// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace distad {

/// Knot vector a_0 < a_1 < ... < a_d partitioning the support [a_0, a_d]
/// into d bins. Bin k covers [a_k, a_{k+1}); the last bin is closed.
class BinGrid {
 public:
  /// Validates strict monotonicity, finiteness and at least two bins.
  explicit BinGrid(std::vector<double> knots);

  std::span<const double> knots() const noexcept { return knots_; }
  std::size_t bin_count() const noexcept { return knots_.size() - 1; }
  double y_min() const noexcept { return knots_.front(); }
  double y_max() const noexcept { return knots_.back(); }

  /// Index of the bin containing `value`; out-of-support values are
  /// clamped into the edge bins.
  std::size_t bin_index(double value) const;

  /// Stable 64-bit fingerprint of the knot positions.
  std::uint64_t fingerprint() const noexcept;

  friend bool operator==(const BinGrid&, const BinGrid&) = default;

 private:
  std::vector<double> knots_;
};

struct Support {
  double y_min;
  double y_max;
};

/// [min - margin * range, max + margin * range] over the given values.
Support default_support(std::span<const double> values, double margin = 0.05);

BinGrid make_regular_grid(double y_min, double y_max, std::size_t bins);

/// Interior knots are the empirical quantiles of `pooled` (clamped to the
/// support) at levels k/d. Duplicate knots are merged and the widest gaps
/// are split at their midpoints until `bins` bins exist again.
BinGrid make_quantile_grid(std::span<const double> pooled, std::size_t bins, Support support);

/// Per-interval observation in one of three regimes.
class BinnedObservation {
 public:
  enum class Kind { finite, asymptotic, missing };

  static BinnedObservation finite(std::vector<std::uint32_t> counts, std::int64_t interval = 0);
  static BinnedObservation asymptotic(std::vector<double> probs, std::int64_t interval = 0);
  /// An interval without samples (empty aggregation window).
  static BinnedObservation missing(std::size_t bins, std::int64_t interval = 0);

  Kind kind() const noexcept { return kind_; }
  bool is_missing() const noexcept { return kind_ == Kind::missing; }
  std::size_t bin_count() const noexcept { return bins_; }
  std::int64_t interval_index() const noexcept { return interval_; }
  void set_interval_index(std::int64_t t) noexcept { interval_ = t; }

  /// Count vector m_t; empty unless kind() == finite.
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }
  /// n_t; zero unless kind() == finite.
  std::uint64_t sample_count() const noexcept { return sample_count_; }
  /// Probability vector p_t; empty unless kind() == asymptotic.
  std::span<const double> probs() const noexcept { return probs_; }

  /// Normalized frequencies m_t / n_t or p_t; the model input for both regimes.
  std::vector<double> frequencies() const;

 private:
  BinnedObservation() = default;

  Kind kind_ = Kind::missing;
  std::size_t bins_ = 0;
  std::int64_t interval_ = 0;
  std::vector<std::uint32_t> counts_;
  std::uint64_t sample_count_ = 0;
  std::vector<double> probs_;
};

/// Piecewise-linear CDF through (a_k, F(a_k)), k = 0..d.
class PiecewiseLinearCdf {
 public:
  PiecewiseLinearCdf(BinGrid grid, std::vector<double> cum);

  /// Interpolates a quantile function given as (level, value) pairs.
  /// The support endpoints anchor the curve at levels 0 and 1; values
  /// outside the support are clamped onto it.
  static PiecewiseLinearCdf from_quantiles(BinGrid grid, std::span<const double> levels,
                                           std::span<const double> values);

  /// Standard level convention for a K-quantile vector: j / (K + 1), j = 1..K.
  static std::vector<double> standard_levels(std::size_t count);

  const BinGrid& grid() const noexcept { return grid_; }
  std::span<const double> cum() const noexcept { return cum_; }

 private:
  BinGrid grid_;
  std::vector<double> cum_;
};

BinnedObservation bin_samples(std::span<const double> samples, const BinGrid& grid,
                              std::int64_t interval = 0);

/// p_k = F(a_k) - F(a_{k-1}).
BinnedObservation cdf_to_probs(const PiecewiseLinearCdf& cdf, const BinGrid& grid,
                               std::int64_t interval = 0);

struct Event {
  std::int64_t timestamp;  // epoch seconds
  double value;
};

struct AggregatedWindow {
  std::int64_t interval_index;
  std::vector<double> samples;
};

/// Groups a time-ordered event stream into fixed windows,
/// interval_index = floor(timestamp / window).
///
/// Windows stay open until an event arrives more than `reorder_slack`
/// seconds past their end; events for an already closed window raise
/// LateEvent. Gaps produce windows with no samples.
class EventAggregator {
 public:
  explicit EventAggregator(std::int64_t window_seconds, std::int64_t reorder_slack = 0);

  /// Adds an event; returns the windows closed by it, in order.
  std::vector<AggregatedWindow> push(const Event& event);
  /// Closes all open windows.
  std::vector<AggregatedWindow> flush();

  std::int64_t window_seconds() const noexcept { return window_; }

 private:
  std::int64_t window_index(std::int64_t timestamp) const;
  std::vector<AggregatedWindow> close_through(std::int64_t last_index);

  std::int64_t window_;
  std::int64_t slack_;
  std::map<std::int64_t, std::vector<double>> open_;
  std::optional<std::int64_t> next_to_emit_;
};

/// Convenience wrapper: aggregates a whole event vector.
std::vector<AggregatedWindow> aggregate_events(std::span<const Event> events,
                                               std::int64_t window_seconds,
                                               std::int64_t reorder_slack = 0);

}  // namespace distad
