// SPDX-License-Identifier: Apache-2.0
#include "distad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bytes.hpp"
#include "distad/error.hpp"

namespace distad {

namespace {

constexpr double kProbTolerance = 1e-9;
constexpr double kExactTieTolerance = 1e-12;
constexpr double kSampleTieTolerance = 1e-9;

constexpr char kStateMagic[4] = {'D', 'A', 'D', 'S'};
constexpr std::uint32_t kStateVersion = 1;
constexpr std::size_t kMaxVector = 1 << 20;

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
}

void check_samples(std::size_t samples) {
  if (samples < 100) throw InvalidArgument("Monte Carlo level sets need at least 100 samples");
}

double sample_tolerance(double loglik) {
  return kSampleTieTolerance * std::max(1.0, std::abs(loglik));
}

enum SeedStream : std::uint64_t { kWindowStream = 0, kSubwindowStream = 1 };

std::uint64_t window_seed(const DetectorConfig& c, std::int64_t interval) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(interval), kWindowStream);
}

std::uint64_t subwindow_seed(const DetectorConfig& c, std::int64_t interval, std::uint32_t index) {
  return derive_seed(derive_seed(c.seed, static_cast<std::uint64_t>(interval), kSubwindowStream),
                     index);
}

}  // namespace

LevelSetThreshold exact_eta(std::span<const Outcome> outcomes, double epsilon) {
  check_epsilon(epsilon);
  if (outcomes.empty()) throw InvalidArgument("exact_eta: empty outcome list");
  double total = 0.0;
  for (const auto& o : outcomes) {
    if (!(o.prob >= 0.0) || std::isnan(o.loglik)) {
      throw InvalidArgument("exact_eta: invalid outcome");
    }
    total += o.prob;
  }
  if (std::abs(total - 1.0) > kProbTolerance) {
    throw InvalidArgument("exact_eta: probabilities must sum to 1");
  }
  std::vector<Outcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Outcome& a, const Outcome& b) { return a.loglik > b.loglik; });
  const double target = 1.0 - epsilon;
  double mass = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double level = sorted[i].loglik;
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].loglik >= level - kExactTieTolerance) {
      mass += sorted[j].prob;
      ++j;
    }
    if (mass >= target - kExactTieTolerance || j == sorted.size()) {
      return {sorted[j - 1].loglik, epsilon, EtaMethod::exact, 0};
    }
    i = j;
  }
  return {sorted.back().loglik, epsilon, EtaMethod::exact, 0};
}

std::vector<double> sample_logliks(const ConcentrationVector& alpha, Regime regime,
                                   std::size_t samples, Rng& rng) {
  std::vector<double> out(samples);
  if (regime.trials) {
    const DirMultScorer scorer(*regime.trials, alpha);
    for (auto& v : out) v = scorer.score(dirmult_sample(*regime.trials, alpha, rng));
  } else {
    const DirichletScorer scorer(alpha);
    std::vector<double> log_p(alpha.size());
    for (auto& v : out) {
      dirichlet_sample_log(alpha, rng, log_p);
      v = scorer.score_log(log_p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

LevelSetThreshold mc_eta_from_sorted(std::span<const double> sorted, double epsilon) {
  check_epsilon(epsilon);
  check_samples(sorted.size());
  const auto M = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(epsilon * M - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return {sorted[rank - 1], epsilon, EtaMethod::monte_carlo, sorted.size()};
}

LevelSetThreshold mc_eta(const ConcentrationVector& alpha, Regime regime, double epsilon,
                         std::size_t samples, Rng& rng) {
  check_epsilon(epsilon);
  check_samples(samples);
  const auto sorted = sample_logliks(alpha, regime, samples, rng);
  return mc_eta_from_sorted(sorted, epsilon);
}

double mc_p_value(std::span<const double> sorted, double loglik) {
  if (sorted.empty()) throw InvalidArgument("mc_p_value: no samples");
  const double M = static_cast<double>(sorted.size());
  double count = 0.0;
  if (loglik > -std::numeric_limits<double>::infinity()) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), loglik + sample_tolerance(loglik));
    count = static_cast<double>(it - sorted.begin());
  }
  return std::max(count / M, 1.0 / (M + 1.0));
}

AnomalyScore point_score(const ConcentrationVector& alpha, std::size_t bin, double epsilon) {
  check_epsilon(epsilon);
  if (bin >= alpha.size()) throw InvalidArgument("point_score: bin out of range");
  const double observed = alpha[bin];
  const double limit = observed * (1.0 + kExactTieTolerance);
  double mass = 0.0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (alpha[k] <= limit) mass += alpha[k];
  }
  const double p = std::min(1.0, mass / alpha.alpha0());
  AnomalyScore s;
  s.log_p_point = std::log(p);
  s.combined = *s.log_p_point;
  s.is_anomaly = p < epsilon;
  return s;
}

namespace {

AnomalyScore mc_score(std::span<const double> sorted, double loglik, double epsilon) {
  const LevelSetThreshold eta = mc_eta_from_sorted(sorted, epsilon);
  AnomalyScore s;
  s.log_p_window = std::log(mc_p_value(sorted, loglik));
  s.combined = *s.log_p_window;
  s.is_anomaly = loglik < eta.log_eta - sample_tolerance(eta.log_eta);
  return s;
}

}  // namespace

AnomalyScore window_score(const ConcentrationVector& alpha, std::span<const std::uint32_t> counts,
                          std::uint64_t n, double epsilon, std::size_t samples, Rng& rng) {
  check_epsilon(epsilon);
  check_samples(samples);
  const double observed = dirmult_logpmf(counts, n, alpha).value;
  return mc_score(sample_logliks(alpha, Regime{n}, samples, rng), observed, epsilon);
}

AnomalyScore asymptotic_score(const ConcentrationVector& alpha, std::span<const double> p_obs,
                              double epsilon, std::size_t samples, Rng& rng) {
  check_epsilon(epsilon);
  check_samples(samples);
  const double observed = dirichlet_logpdf(p_obs, alpha).value;
  return mc_score(sample_logliks(alpha, Regime{}, samples, rng), observed, epsilon);
}

// ---------------------------------------------------------------------------
// Detector

void DetectorConfig::validate() const {
  check_epsilon(epsilon);
  if (mode != DetectMode::single) check_samples(samples);
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::point:
      return "point";
    case Stage::subwindow:
      return "subwindow";
    case Stage::window:
      return "window";
    case Stage::combined:
      return "combined";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  if (name == "point") return Stage::point;
  if (name == "subwindow") return Stage::subwindow;
  if (name == "window") return Stage::window;
  if (name == "combined") return Stage::combined;
  throw InvalidArgument("unknown stage '" + name + "'");
}

namespace {

void check_state(const DetectorState& state, const ScoringModel& model) {
  const auto& dims = model.params.dims();
  if (state.grid_fingerprint != model.grid.fingerprint() ||
      model.grid.bin_count() != dims.bins || !state.hidden.matches(dims) ||
      state.last_z.size() != dims.bins || state.alpha.size() != dims.bins ||
      state.counts.size() != dims.bins || state.sub_counts.size() != dims.bins ||
      model.covariates.width() != dims.covariates) {
    throw StateCorrupt("detector state does not match the model");
  }
}

void open_interval(DetectorState& state, const ScoringModel& model, std::int64_t interval) {
  const Covariates x = time_features(model.covariates, interval);
  StepOutput out = step(model.params, state.hidden, state.last_z, x);
  state.hidden = std::move(out.state);
  state.alpha.assign(out.alpha.alpha().begin(), out.alpha.alpha().end());
  state.interval_index = interval;
  std::fill(state.counts.begin(), state.counts.end(), 0);
  std::fill(state.sub_counts.begin(), state.sub_counts.end(), 0);
  state.sub_index = 0;
  state.last_point_log_p.reset();
}

// Opens the interval after the current one; the very first interval of a
// metric only primes the model input.
void advance(DetectorState& state, const ScoringModel& model) {
  state.primed = true;
  open_interval(state, model, state.interval_index + 1);
}

std::uint64_t total_count(std::span<const std::uint32_t> counts) {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

// Scores of one finite-mode event against the open interval's predictive.
void score_event(DetectorState& state, const ConcentrationVector& alpha, std::size_t bin,
                 std::vector<ScoreRecord>& out) {
  const auto& c = state.config;
  const AnomalyScore ps = point_score(alpha, bin, c.epsilon);
  out.push_back({state.interval_index, Stage::point, *ps.log_p_point, ps.is_anomaly});
  state.last_point_log_p = ps.log_p_point;
  ++state.counts[bin];
  if (c.mode == DetectMode::finite && c.subwindow > 0) {
    ++state.sub_counts[bin];
    if (total_count(state.sub_counts) == c.subwindow) {
      Rng rng(subwindow_seed(c, state.interval_index, state.sub_index));
      const AnomalyScore ss =
          window_score(alpha, state.sub_counts, c.subwindow, c.epsilon, c.samples, rng);
      out.push_back({state.interval_index, Stage::subwindow, *ss.log_p_window, ss.is_anomaly});
      std::fill(state.sub_counts.begin(), state.sub_counts.end(), 0);
      ++state.sub_index;
    }
  }
}

// Window-close scores of a finite-mode interval; returns nothing when empty.
void score_close(const DetectorState& state, const ConcentrationVector& alpha,
                 std::vector<ScoreRecord>& out) {
  const auto& c = state.config;
  const std::uint64_t n = total_count(state.counts);
  if (n == 0 || c.mode != DetectMode::finite) return;
  Rng rng(window_seed(c, state.interval_index));
  AnomalyScore ws = window_score(alpha, state.counts, n, c.epsilon, c.samples, rng);
  out.push_back({state.interval_index, Stage::window, *ws.log_p_window, ws.is_anomaly});
  const double combined = *ws.log_p_window + state.last_point_log_p.value_or(0.0);
  out.push_back({state.interval_index, Stage::combined, combined, ws.is_anomaly});
}

std::vector<double> realized_z(std::span<const std::uint32_t> counts) {
  const std::uint64_t n = total_count(counts);
  std::vector<double> z(counts.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
  }
  return z;
}

bool scoring(const DetectorState& state) {
  return state.primed && state.interval_index >= state.score_from;
}

void close_interval(DetectorState& state, const ScoringModel& model,
                    std::vector<ScoreRecord>& out) {
  if (scoring(state)) score_close(state, ConcentrationVector(state.alpha), out);
  if (total_count(state.counts) > 0) state.last_z = realized_z(state.counts);
  advance(state, model);
}

void score_distribution(const DetectorState& state, const ConcentrationVector& alpha,
                        std::span<const double> probs, std::vector<ScoreRecord>& out) {
  const auto& c = state.config;
  Rng rng(window_seed(c, state.interval_index));
  const AnomalyScore s = asymptotic_score(alpha, probs, c.epsilon, c.samples, rng);
  out.push_back({state.interval_index, Stage::window, *s.log_p_window, s.is_anomaly});
  out.push_back({state.interval_index, Stage::combined, s.combined, s.is_anomaly});
}

}  // namespace

DetectorState warm_start(const ScoringModel& model, const DetectorConfig& config,
                         std::span<const BinnedObservation> history, std::int64_t first_interval) {
  config.validate();
  const auto& dims = model.params.dims();
  if (model.grid.bin_count() != dims.bins) throw InvalidArgument("warm_start: grid/model mismatch");
  if (history.empty()) throw InvalidArgument("warm_start: empty history");
  DetectorState s;
  s.config = config;
  s.grid_fingerprint = model.grid.fingerprint();
  s.counts.assign(dims.bins, 0);
  s.sub_counts.assign(dims.bins, 0);
  const auto covs = time_features(model.covariates, first_interval, history.size());
  const auto& first = history.front();
  std::vector<double> z0 = first.is_missing()
                               ? std::vector<double>(dims.bins, 1.0 / static_cast<double>(dims.bins))
                               : first.frequencies();
  if (history.size() > 1) {
    UnrollResult r = unroll_from(model.params, history.subspan(1), std::span(covs).subspan(1), z0,
                                 HiddenState::zeros(dims));
    s.hidden = std::move(r.final_state);
    s.last_z = std::move(r.last_z);
  } else {
    s.hidden = HiddenState::zeros(dims);
    s.last_z = std::move(z0);
  }
  open_interval(s, model, first_interval + static_cast<std::int64_t>(history.size()));
  s.score_from = s.interval_index;
  return s;
}

DetectorState cold_start(const ScoringModel& model, const DetectorConfig& config,
                         std::int64_t first_interval, std::int64_t score_from) {
  config.validate();
  const auto& dims = model.params.dims();
  if (model.grid.bin_count() != dims.bins) throw InvalidArgument("cold_start: grid/model mismatch");
  if (score_from <= first_interval) {
    throw InvalidArgument("cold_start: the first interval cannot be scored");
  }
  DetectorState s;
  s.config = config;
  s.grid_fingerprint = model.grid.fingerprint();
  s.hidden = HiddenState::zeros(dims);
  s.last_z.assign(dims.bins, 1.0 / static_cast<double>(dims.bins));
  s.alpha.assign(dims.bins, 1.0);
  s.counts.assign(dims.bins, 0);
  s.sub_counts.assign(dims.bins, 0);
  s.interval_index = first_interval;
  s.primed = false;
  s.score_from = score_from;
  return s;
}

std::vector<ScoreRecord> stream_step(DetectorState& state, const ScoringModel& model,
                                     const StreamInput& input) {
  check_state(state, model);
  std::vector<ScoreRecord> out;
  if (const auto* ev = std::get_if<Event>(&input)) {
    if (state.config.mode == DetectMode::asymptotic) {
      throw InvalidArgument("stream_step: events are not accepted in asymptotic mode");
    }
    if (!std::isfinite(ev->value)) throw InvalidArgument("stream_step: non-finite event value");
    const std::int64_t w = model.covariates.window_seconds;
    const std::int64_t index = ev->timestamp >= 0 ? ev->timestamp / w : -((-ev->timestamp + w - 1) / w);
    if (index < state.interval_index) {
      throw LateEvent("stream_step: event for an already closed interval", ev->timestamp,
                      ev->value);
    }
    while (state.interval_index < index) close_interval(state, model, out);
    const std::size_t bin = model.grid.bin_index(ev->value);
    if (scoring(state)) {
      score_event(state, ConcentrationVector(state.alpha), bin, out);
    } else {
      ++state.counts[bin];
    }
  } else if (std::holds_alternative<EndOfWindow>(input)) {
    close_interval(state, model, out);
  } else {
    const auto& dist = std::get<Distribution>(input);
    if (state.config.mode != DetectMode::asymptotic) {
      throw InvalidArgument("stream_step: distributions are only accepted in asymptotic mode");
    }
    if (dist.interval_index < state.interval_index) {
      throw InvalidArgument("stream_step: distribution for an already closed interval");
    }
    if (dist.probs.size() != state.alpha.size()) {
      throw InvalidArgument("stream_step: distribution has wrong number of bins");
    }
    while (state.interval_index < dist.interval_index) close_interval(state, model, out);
    const auto observed = BinnedObservation::asymptotic(dist.probs, dist.interval_index);
    if (scoring(state)) score_distribution(state, ConcentrationVector(state.alpha), dist.probs, out);
    state.last_z = observed.frequencies();
    advance(state, model);
  }
  return out;
}

std::vector<ScoreRecord> detect_batch(const DetectorState& start, const ScoringModel& model,
                                      std::span<const IntervalData> intervals) {
  check_state(start, model);
  if (!scoring(start)) throw InvalidArgument("detect_batch: detector state is still warming up");
  std::vector<ScoreRecord> out;
  if (intervals.empty()) return out;
  const auto& dims = model.params.dims();
  const std::int64_t first = start.interval_index;
  if (intervals.front().interval_index < first) {
    throw InvalidArgument("detect_batch: interval precedes the detector state");
  }
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    if (intervals[i].interval_index <= intervals[i - 1].interval_index) {
      throw InvalidArgument("detect_batch: intervals must be strictly increasing");
    }
  }
  const bool asymptotic = start.config.mode == DetectMode::asymptotic;
  if (total_count(start.counts) > 0) {
    throw InvalidArgument("detect_batch: detector state has a partially filled interval");
  }

  // Dense observation sequence from the open interval to the last one.
  const auto span = static_cast<std::size_t>(intervals.back().interval_index - first + 1);
  std::vector<BinnedObservation> obs;
  std::vector<std::vector<std::size_t>> bins(span);
  obs.reserve(span);
  for (std::size_t i = 0; i < span; ++i) obs.push_back(BinnedObservation::missing(dims.bins));
  for (const auto& iv : intervals) {
    const auto slot = static_cast<std::size_t>(iv.interval_index - first);
    if (asymptotic) {
      if (iv.probs.size() != dims.bins) throw InvalidArgument("detect_batch: wrong number of bins");
      obs[slot] = BinnedObservation::asymptotic(iv.probs, iv.interval_index);
    } else if (!iv.values.empty()) {
      std::vector<std::uint32_t> counts(dims.bins, 0);
      for (double v : iv.values) {
        if (!std::isfinite(v)) throw InvalidArgument("detect_batch: non-finite value");
        const auto b = model.grid.bin_index(v);
        bins[slot].push_back(b);
        ++counts[b];
      }
      obs[slot] = BinnedObservation::finite(std::move(counts), iv.interval_index);
    }
  }

  // Predictives: the open interval's alpha from the state, the rest by unrolling.
  std::vector<ConcentrationVector> alphas;
  alphas.reserve(span);
  alphas.emplace_back(start.alpha);
  if (span > 1) {
    std::vector<double> z = start.last_z;
    const auto covs = time_features(model.covariates, first + 1, span - 1);
    HiddenState h = start.hidden;
    for (std::size_t i = 0; i + 1 < span; ++i) {
      if (!obs[i].is_missing()) z = obs[i].frequencies();
      StepOutput next = step(model.params, h, z, covs[i]);
      h = std::move(next.state);
      alphas.push_back(std::move(next.alpha));
    }
  }

  DetectorState scratch = start;
  for (std::size_t i = 0; i < span; ++i) {
    const auto& alpha = alphas[i];
    scratch.interval_index = first + static_cast<std::int64_t>(i);
    if (asymptotic) {
      if (!obs[i].is_missing()) score_distribution(scratch, alpha, obs[i].probs(), out);
      continue;
    }
    std::fill(scratch.counts.begin(), scratch.counts.end(), 0);
    std::fill(scratch.sub_counts.begin(), scratch.sub_counts.end(), 0);
    scratch.sub_index = 0;
    scratch.last_point_log_p.reset();
    for (auto b : bins[i]) score_event(scratch, alpha, b, out);
    score_close(scratch, alpha, out);
  }
  return out;
}

std::vector<StreamInput> to_stream(std::span<const IntervalData> intervals, DetectMode mode,
                                   std::int64_t window_seconds) {
  std::vector<StreamInput> out;
  for (const auto& iv : intervals) {
    if (mode == DetectMode::asymptotic) {
      out.emplace_back(Distribution{iv.interval_index, iv.probs});
    } else {
      for (double v : iv.values) out.emplace_back(Event{iv.interval_index * window_seconds, v});
      out.emplace_back(EndOfWindow{});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::vector<std::uint8_t> serialize_state(const DetectorState& s) {
  detail::ByteWriter w;
  w.put_raw(kStateMagic, sizeof kStateMagic);
  w.put(kStateVersion);
  w.put(s.grid_fingerprint);
  w.put(static_cast<std::uint8_t>(s.config.mode));
  w.put(s.config.epsilon);
  w.put<std::uint64_t>(s.config.samples);
  w.put(s.config.seed);
  w.put(s.config.subwindow);
  w.put(s.interval_index);
  w.put<std::uint64_t>(s.hidden.h.size());
  for (std::size_t l = 0; l < s.hidden.h.size(); ++l) {
    w.put_doubles(std::span(s.hidden.h[l].data(), static_cast<std::size_t>(s.hidden.h[l].size())));
    w.put_doubles(std::span(s.hidden.c[l].data(), static_cast<std::size_t>(s.hidden.c[l].size())));
  }
  w.put_doubles(s.last_z);
  w.put_doubles(s.alpha);
  w.put_u32s(s.counts);
  w.put_u32s(s.sub_counts);
  w.put(s.sub_index);
  w.put<std::uint8_t>(s.last_point_log_p.has_value());
  w.put(s.last_point_log_p.value_or(0.0));
  w.put<std::uint8_t>(s.primed);
  w.put(s.score_from);
  auto& bytes = w.bytes();
  const std::uint32_t crc = detail::crc32(bytes);
  w.put(crc);
  return std::move(bytes);
}

DetectorState deserialize_state(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw StateCorrupt("detector state: truncated");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (detail::crc32(bytes.first(bytes.size() - 4)) != stored) {
    throw StateCorrupt("detector state: checksum mismatch");
  }
  detail::ByteReader r(bytes.first(bytes.size() - 4), "detector state");
  r.expect_raw(kStateMagic, sizeof kStateMagic);
  if (r.get<std::uint32_t>() != kStateVersion) throw StateCorrupt("detector state: unsupported version");
  DetectorState s;
  s.grid_fingerprint = r.get<std::uint64_t>();
  const auto mode = r.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(DetectMode::single)) {
    throw StateCorrupt("detector state: unknown mode");
  }
  s.config.mode = static_cast<DetectMode>(mode);
  s.config.epsilon = r.get<double>();
  s.config.samples = static_cast<std::size_t>(r.get<std::uint64_t>());
  s.config.seed = r.get<std::uint64_t>();
  s.config.subwindow = r.get<std::uint32_t>();
  s.interval_index = r.get<std::int64_t>();
  const auto layers = r.get<std::uint64_t>();
  if (layers > 64) throw StateCorrupt("detector state: implausible layer count");
  for (std::uint64_t l = 0; l < layers; ++l) {
    const auto h = r.get_doubles(kMaxVector);
    const auto c = r.get_doubles(kMaxVector);
    s.hidden.h.push_back(Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size())));
    s.hidden.c.push_back(Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size())));
  }
  s.last_z = r.get_doubles(kMaxVector);
  s.alpha = r.get_doubles(kMaxVector);
  s.counts = r.get_u32s(kMaxVector);
  s.sub_counts = r.get_u32s(kMaxVector);
  s.sub_index = r.get<std::uint32_t>();
  const bool has_point = r.get<std::uint8_t>() != 0;
  const double point = r.get<double>();
  if (has_point) s.last_point_log_p = point;
  s.primed = r.get<std::uint8_t>() != 0;
  s.score_from = r.get<std::int64_t>();
  if (r.remaining() != 0) throw StateCorrupt("detector state: trailing bytes");
  try {
    s.config.validate();
  } catch (const InvalidArgument& e) {
    throw StateCorrupt(std::string("detector state: ") + e.what());
  }
  if (!s.hidden.all_finite()) throw StateCorrupt("detector state: non-finite hidden state");
  return s;
}

void save_state(const DetectorState& state, const std::string& path) {
  detail::write_file_atomic(path, serialize_state(state));
}

DetectorState load_state(const std::string& path) {
  return deserialize_state(detail::read_file(path));
}

}  // namespace distad
