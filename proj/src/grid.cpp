// SPDX-License-Identifier: Apache-2.0
#include "distad/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "distad/error.hpp"
#include "distad/random.hpp"

namespace distad {

namespace {

constexpr double kSimplexTolerance = 1e-9;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Type-7 empirical quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double level) {
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BinGrid::BinGrid(std::vector<double> knots) : knots_(std::move(knots)) {
  if (knots_.size() < 3) throw InvalidArgument("BinGrid: need at least 2 bins");
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(knots_[k])) throw InvalidArgument("BinGrid: non-finite knot");
    if (k > 0 && !(knots_[k - 1] < knots_[k])) {
      throw InvalidArgument("BinGrid: knots must be strictly increasing");
    }
  }
}

std::size_t BinGrid::bin_index(double value) const {
  if (std::isnan(value)) throw InvalidArgument("bin_index: NaN sample");
  const std::size_t d = bin_count();
  if (value < knots_[1]) return 0;
  if (value >= knots_[d - 1]) return d - 1;
  // First knot strictly greater than value closes the bin.
  const auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, value);
  return static_cast<std::size_t>(it - knots_.begin()) - 1;
}

std::uint64_t BinGrid::fingerprint() const noexcept {
  std::uint64_t h = mix64(knots_.size());
  for (double k : knots_) h = mix64(h ^ std::bit_cast<std::uint64_t>(k));
  return h;
}

Support default_support(std::span<const double> values, double margin) {
  if (values.empty()) throw InvalidArgument("default_support: no values");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("default_support: non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (range <= 0.0) range = std::max(1.0, std::abs(lo));
  return {lo - margin * range, hi + margin * range};
}

BinGrid make_regular_grid(double y_min, double y_max, std::size_t bins) {
  if (!std::isfinite(y_min) || !std::isfinite(y_max)) {
    throw InvalidArgument("make_regular_grid: non-finite bounds");
  }
  if (!(y_min < y_max)) throw InvalidArgument("make_regular_grid: need y_min < y_max");
  if (bins < 2) throw InvalidArgument("make_regular_grid: need at least 2 bins");
  std::vector<double> knots(bins + 1);
  const double width = y_max - y_min;
  for (std::size_t k = 0; k <= bins; ++k) {
    knots[k] = y_min + static_cast<double>(k) * width / static_cast<double>(bins);
  }
  knots.back() = y_max;
  return BinGrid(std::move(knots));
}

BinGrid make_quantile_grid(std::span<const double> pooled, std::size_t bins, Support support) {
  if (bins < 2) throw InvalidArgument("make_quantile_grid: need at least 2 bins");
  if (!std::isfinite(support.y_min) || !std::isfinite(support.y_max) ||
      !(support.y_min < support.y_max)) {
    throw InvalidArgument("make_quantile_grid: invalid support");
  }
  std::vector<double> sorted;
  sorted.reserve(pooled.size());
  for (double v : pooled) {
    if (std::isnan(v)) throw InvalidArgument("make_quantile_grid: NaN sample");
    sorted.push_back(std::clamp(v, support.y_min, support.y_max));
  }
  std::sort(sorted.begin(), sorted.end());
  std::size_t n_distinct = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) n_distinct += sorted[i] != sorted[i - 1];
  if (n_distinct < bins + 1) {
    throw DegenerateGrid("make_quantile_grid: " + std::to_string(n_distinct) +
                         " distinct values, need " + std::to_string(bins + 1));
  }

  std::vector<double> knots;
  knots.reserve(bins + 1);
  knots.push_back(support.y_min);
  for (std::size_t k = 1; k < bins; ++k) {
    knots.push_back(sorted_quantile(sorted, static_cast<double>(k) / static_cast<double>(bins)));
  }
  knots.push_back(support.y_max);

  // Merge duplicates (including interior knots sitting on an endpoint).
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  while (knots.size() < bins + 1) {
    std::size_t widest = 0;
    for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
      if (knots[k + 1] - knots[k] > knots[widest + 1] - knots[widest]) widest = k;
    }
    const double mid = 0.5 * (knots[widest] + knots[widest + 1]);
    knots.insert(knots.begin() + static_cast<std::ptrdiff_t>(widest) + 1, mid);
  }
  return BinGrid(std::move(knots));
}

BinnedObservation BinnedObservation::finite(std::vector<std::uint32_t> counts,
                                            std::int64_t interval) {
  if (counts.size() < 2) throw InvalidArgument("BinnedObservation: need at least 2 bins");
  BinnedObservation obs;
  obs.kind_ = Kind::finite;
  obs.bins_ = counts.size();
  obs.interval_ = interval;
  obs.sample_count_ = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (obs.sample_count_ == 0) throw InvalidArgument("BinnedObservation: zero samples");
  obs.counts_ = std::move(counts);
  return obs;
}

BinnedObservation BinnedObservation::asymptotic(std::vector<double> probs,
                                                std::int64_t interval) {
  if (probs.size() < 2) throw InvalidArgument("BinnedObservation: need at least 2 bins");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw InvalidArgument("BinnedObservation: probabilities must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw InvalidArgument("BinnedObservation: probabilities must sum to 1");
  }
  BinnedObservation obs;
  obs.kind_ = Kind::asymptotic;
  obs.bins_ = probs.size();
  obs.interval_ = interval;
  obs.probs_ = std::move(probs);
  return obs;
}

BinnedObservation BinnedObservation::missing(std::size_t bins, std::int64_t interval) {
  if (bins < 2) throw InvalidArgument("BinnedObservation: need at least 2 bins");
  BinnedObservation obs;
  obs.kind_ = Kind::missing;
  obs.bins_ = bins;
  obs.interval_ = interval;
  return obs;
}

std::vector<double> BinnedObservation::frequencies() const {
  switch (kind_) {
    case Kind::finite: {
      std::vector<double> z(bins_);
      const double n = static_cast<double>(sample_count_);
      for (std::size_t k = 0; k < bins_; ++k) z[k] = counts_[k] / n;
      return z;
    }
    case Kind::asymptotic:
      return probs_;
    case Kind::missing:
      break;
  }
  throw InvalidArgument("BinnedObservation: missing observation has no frequencies");
}

PiecewiseLinearCdf::PiecewiseLinearCdf(BinGrid grid, std::vector<double> cum)
    : grid_(std::move(grid)), cum_(std::move(cum)) {
  if (cum_.size() != grid_.knots().size()) {
    throw InvalidArgument("PiecewiseLinearCdf: cum must have d + 1 entries");
  }
  if (cum_.front() != 0.0 || cum_.back() != 1.0) {
    throw InvalidArgument("PiecewiseLinearCdf: endpoints must be exactly 0 and 1");
  }
  for (std::size_t k = 1; k < cum_.size(); ++k) {
    if (!std::isfinite(cum_[k]) || cum_[k] < cum_[k - 1]) {
      throw InvalidArgument("PiecewiseLinearCdf: cum must be non-decreasing");
    }
  }
}

std::vector<double> PiecewiseLinearCdf::standard_levels(std::size_t count) {
  std::vector<double> levels(count);
  for (std::size_t j = 0; j < count; ++j) {
    levels[j] = static_cast<double>(j + 1) / static_cast<double>(count + 1);
  }
  return levels;
}

PiecewiseLinearCdf PiecewiseLinearCdf::from_quantiles(BinGrid grid, std::span<const double> levels,
                                                      std::span<const double> values) {
  if (levels.size() != values.size() || levels.empty()) {
    throw InvalidArgument("from_quantiles: levels and values must be non-empty and equal length");
  }
  const double lo = grid.y_min(), hi = grid.y_max();
  std::vector<double> xs{lo}, ls{0.0};
  xs.reserve(values.size() + 2);
  ls.reserve(values.size() + 2);
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j]) || !(levels[j] > 0.0 && levels[j] < 1.0)) {
      throw InvalidArgument("from_quantiles: invalid quantile entry");
    }
    if (j > 0 && (values[j] < values[j - 1] || levels[j] <= levels[j - 1])) {
      throw InvalidArgument("from_quantiles: quantiles must be non-decreasing");
    }
    xs.push_back(std::clamp(values[j], lo, hi));
    ls.push_back(levels[j]);
  }
  xs.push_back(hi);
  ls.push_back(1.0);

  const auto knots = grid.knots();
  std::vector<double> cum(knots.size());
  cum.front() = 0.0;
  cum.back() = 1.0;
  for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
    const double a = knots[k];
    // Last point with x <= a; the CDF is right-continuous at clamped ties.
    const auto idx =
        static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), a) - xs.begin()) - 1;
    if (idx + 1 >= xs.size()) {
      cum[k] = 1.0;
    } else {
      const double t = (a - xs[idx]) / (xs[idx + 1] - xs[idx]);
      cum[k] = ls[idx] + t * (ls[idx + 1] - ls[idx]);
    }
    cum[k] = std::clamp(cum[k], cum[k - 1], 1.0);
  }
  return PiecewiseLinearCdf(std::move(grid), std::move(cum));
}

BinnedObservation bin_samples(std::span<const double> samples, const BinGrid& grid,
                              std::int64_t interval) {
  if (samples.empty()) throw InvalidArgument("bin_samples: empty sample set");
  std::vector<std::uint32_t> counts(grid.bin_count(), 0);
  for (double s : samples) ++counts[grid.bin_index(s)];
  return BinnedObservation::finite(std::move(counts), interval);
}

BinnedObservation cdf_to_probs(const PiecewiseLinearCdf& cdf, const BinGrid& grid,
                               std::int64_t interval) {
  if (!(cdf.grid() == grid)) throw InvalidArgument("cdf_to_probs: CDF built on a different grid");
  const auto cum = cdf.cum();
  std::vector<double> probs(grid.bin_count());
  for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = cum[k + 1] - cum[k];
  return BinnedObservation::asymptotic(std::move(probs), interval);
}

EventAggregator::EventAggregator(std::int64_t window_seconds, std::int64_t reorder_slack)
    : window_(window_seconds), slack_(reorder_slack) {
  if (window_ <= 0) throw InvalidArgument("EventAggregator: window must be positive");
  if (slack_ < 0) throw InvalidArgument("EventAggregator: reorder slack must be >= 0");
}

std::int64_t EventAggregator::window_index(std::int64_t timestamp) const {
  return floor_div(timestamp, window_);
}

std::vector<AggregatedWindow> EventAggregator::close_through(std::int64_t last_index) {
  std::vector<AggregatedWindow> closed;
  if (!next_to_emit_) return closed;
  for (std::int64_t i = *next_to_emit_; i <= last_index; ++i) {
    AggregatedWindow w{i, {}};
    if (auto it = open_.find(i); it != open_.end()) {
      w.samples = std::move(it->second);
      open_.erase(it);
    }
    closed.push_back(std::move(w));
  }
  if (last_index >= *next_to_emit_) next_to_emit_ = last_index + 1;
  return closed;
}

std::vector<AggregatedWindow> EventAggregator::push(const Event& event) {
  const std::int64_t w = window_index(event.timestamp);
  if (!next_to_emit_) next_to_emit_ = w;
  if (w < *next_to_emit_) {
    throw LateEvent("late event at t=" + std::to_string(event.timestamp) +
                        " for closed window " + std::to_string(w),
                    event.timestamp, event.value);
  }
  open_[w].push_back(event.value);
  // Window i is final once timestamp >= (i + 1) * window + slack.
  const std::int64_t last_final = floor_div(event.timestamp - slack_, window_) - 1;
  return close_through(last_final);
}

std::vector<AggregatedWindow> EventAggregator::flush() {
  if (open_.empty()) return {};
  return close_through(open_.rbegin()->first);
}

std::vector<AggregatedWindow> aggregate_events(std::span<const Event> events,
                                               std::int64_t window_seconds,
                                               std::int64_t reorder_slack) {
  EventAggregator agg(window_seconds, reorder_slack);
  std::vector<AggregatedWindow> out;
  for (const auto& e : events) {
    auto closed = agg.push(e);
    std::move(closed.begin(), closed.end(), std::back_inserter(out));
  }
  auto rest = agg.flush();
  std::move(rest.begin(), rest.end(), std::back_inserter(out));
  return out;
}

}  // namespace distad
