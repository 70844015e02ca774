// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "distad/detect.hpp"
#include "distad/error.hpp"
#include "properties.hpp"

using namespace distad;

namespace {

std::vector<Outcome> categorical(std::vector<double> probs) {
  std::vector<Outcome> out;
  for (double p : probs) out.push_back({std::log(p), p});
  return out;
}

ScoringModel small_model(std::size_t bins = 6, std::uint64_t seed = 1) {
  CovariateSpec cov;
  cov.window_seconds = 60;
  return {ModelParams::initialized(ModelDims{bins, cov.width(), 5, 2}, seed),
          make_regular_grid(-3.0, 3.0, bins), cov};
}

DetectorState warm(const ScoringModel& model, const DetectorConfig& cfg, std::size_t length = 4) {
  std::vector<BinnedObservation> history;
  for (std::size_t t = 0; t < length; ++t) {
    history.push_back(cfg.mode == DetectMode::asymptotic
                          ? BinnedObservation::asymptotic(std::vector<double>(model.grid.bin_count(),
                                                                              1.0 / model.grid.bin_count()))
                          : bin_samples(std::vector<double>{-0.5, 0.2, 1.1}, model.grid));
  }
  return warm_start(model, cfg, history, 0);
}

std::size_t count_stage(const std::vector<ScoreRecord>& r, Stage s) {
  return static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [&](const auto& x) { return x.stage == s; }));
}

}  // namespace

TEST(ExactEta, Examples) {
  const auto e = exact_eta(categorical({0.7, 0.2, 0.1}), 0.25);
  EXPECT_NEAR(e.log_eta, std::log(0.2), 1e-15);
  EXPECT_EQ(e.method, EtaMethod::exact);
  EXPECT_EQ(e.epsilon, 0.25);

  const auto u = exact_eta(categorical({0.25, 0.25, 0.25, 0.25}), 0.9);
  EXPECT_NEAR(u.log_eta, std::log(0.25), 1e-15);

  const auto one = exact_eta(categorical({1.0}), 0.05);
  EXPECT_EQ(one.log_eta, 0.0);
  EXPECT_THROW(exact_eta(std::vector<Outcome>{}, 0.05), InvalidArgument);
  EXPECT_THROW(exact_eta(categorical({0.5, 0.4}), 0.05), InvalidArgument);
  EXPECT_THROW(exact_eta(categorical({0.5, 0.5}), 0.0), InvalidArgument);
  EXPECT_THROW(exact_eta(categorical({0.5, 0.5}), 1.0), InvalidArgument);
}

TEST(ExactEta, TieClassEntersTogether) {
  // Outcomes of likelihood 0.3 straddle the 1 - eps boundary.
  const auto e = exact_eta(categorical({0.3, 0.3, 0.3, 0.1}), 0.5);
  EXPECT_NEAR(e.log_eta, std::log(0.3), 1e-15);
}

TEST(McEta, MatchesExactOnCategorical) {
  Rng rng(1);
  const auto e = mc_eta(ConcentrationVector({7, 2, 1}), Regime{1}, 0.25, 100000, rng);
  EXPECT_NEAR(e.log_eta, std::log(0.2), 1e-12);
  EXPECT_EQ(e.method, EtaMethod::monte_carlo);
  EXPECT_EQ(e.samples, 100000u);
}

TEST(McEta, TinyEpsilonIsTheMinimum) {
  Rng a(2), b(2);
  const ConcentrationVector alpha({2, 3, 4});
  const auto e = mc_eta(alpha, Regime{20}, 1e-9, 500, a);
  const auto sorted = sample_logliks(alpha, Regime{20}, 500, b);
  EXPECT_EQ(e.log_eta, sorted.front());
}

TEST(McEta, DeterministicAndOrdered) {
  const ConcentrationVector alpha({0.5, 1.5, 3.0, 1.0});
  Rng a(3), b(3);
  EXPECT_EQ(mc_eta(alpha, Regime{}, 0.05, 1000, a).log_eta, mc_eta(alpha, Regime{}, 0.05, 1000, b).log_eta);
  Rng c(4);
  const auto s = sample_logliks(alpha, Regime{}, 1000, c);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(mc_eta_from_sorted(s, 0.05).log_eta, s[49]);
  EXPECT_EQ(mc_eta_from_sorted(s, 0.0505).log_eta, s[50]);
  Rng d(5);
  EXPECT_THROW(mc_eta(alpha, Regime{}, 0.05, 99, d), InvalidArgument);
}

TEST(McPValue, FloorAndTies) {
  const std::vector<double> s{-5.0, -4.0, -4.0, -1.0};
  EXPECT_DOUBLE_EQ(mc_p_value(s, -10.0), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(mc_p_value(s, -4.0), 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(mc_p_value(s, -4.0 + 1e-12), 3.0 / 4.0);
  EXPECT_DOUBLE_EQ(mc_p_value(s, 0.0), 1.0);
}

TEST(McPValue, MonotoneInLikelihood) {
  Rng rng(6);
  const auto s = sample_logliks(ConcentrationVector({1.2, 0.8, 2.5}), Regime{10}, 2000, rng);
  double prev = 0.0;
  for (double l = s.front() - 1.0; l <= s.back() + 1.0; l += 0.01) {
    const double p = mc_p_value(s, l);
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(PointScore, Examples) {
  const ConcentrationVector a({7, 2, 1});
  const auto s3 = point_score(a, 2, 0.25);
  EXPECT_NEAR(*s3.log_p_point, std::log(0.1), 1e-15);
  EXPECT_TRUE(s3.is_anomaly);
  EXPECT_FALSE(s3.log_p_window.has_value());
  EXPECT_EQ(s3.combined, *s3.log_p_point);

  const auto s1 = point_score(a, 0, 0.25);
  EXPECT_NEAR(*s1.log_p_point, 0.0, 1e-15);
  EXPECT_FALSE(s1.is_anomaly);

  const ConcentrationVector sym({3, 3, 3, 3, 3});
  for (std::size_t k = 0; k < 5; ++k) {
    const auto s = point_score(sym, k, 0.5);
    EXPECT_NEAR(*s.log_p_point, 0.0, 1e-15);
    EXPECT_FALSE(s.is_anomaly);
  }
  EXPECT_THROW(point_score(a, 3, 0.25), InvalidArgument);
}

TEST(PointScore, MonotoneInBinMass) {
  const ConcentrationVector a({0.4, 3.0, 1.1, 2.2, 0.9, 5.5});
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x] < a[y]; });
  double prev = -INFINITY;
  for (auto k : order) {
    const double p = *point_score(a, k, 0.05).log_p_point;
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(WindowScore, ModalOutcomeIsNotFlagged) {
  Rng rng(7);
  const auto s = window_score(ConcentrationVector({500, 300, 200}), std::vector<std::uint32_t>{30, 18, 12}, 60,
                              0.05, 1000, rng);
  EXPECT_GT(*s.log_p_window, std::log(0.5));
  EXPECT_FALSE(s.is_anomaly);
  EXPECT_FALSE(s.log_p_point.has_value());
}

TEST(WindowScore, TotalTieIsNeverFlagged) {
  const ConcentrationVector a({1, 1});
  for (std::vector<std::uint32_t> m : {std::vector<std::uint32_t>{2, 0}, {1, 1}, {0, 2}}) {
    Rng rng(8);
    const auto s = window_score(a, m, 2, 0.05, 1000, rng);
    EXPECT_NEAR(*s.log_p_window, 0.0, 1e-12);
    EXPECT_FALSE(s.is_anomaly);
  }
}

TEST(WindowScore, ExtremeCountsHitTheFloor) {
  Rng rng(9);
  const auto s = window_score(ConcentrationVector({500, 300, 200}), std::vector<std::uint32_t>{0, 0, 60}, 60,
                              0.05, 1000, rng);
  EXPECT_NEAR(*s.log_p_window, std::log(1.0 / 1001.0), 1e-12);
  EXPECT_TRUE(s.is_anomaly);
  Rng r2(9);
  EXPECT_THROW(window_score(ConcentrationVector({1, 1}), std::vector<std::uint32_t>{1, 1}, 3, 0.05, 1000, r2),
               InvalidArgument);
}

TEST(AsymptoticScore, CentralAndExtreme) {
  Rng rng(10);
  const auto central = asymptotic_score(ConcentrationVector({2500, 2500, 5000}), std::vector<double>{0.25, 0.25, 0.5},
                                        0.05, 1000, rng);
  EXPECT_FALSE(central.is_anomaly);
  const auto extreme =
      asymptotic_score(ConcentrationVector({2, 2, 2}), std::vector<double>{1.0, 0.0, 0.0}, 0.05, 1000, rng);
  EXPECT_TRUE(extreme.is_anomaly);
  EXPECT_NEAR(*extreme.log_p_window, std::log(1.0 / 1001.0), 1e-12);
  EXPECT_EQ(extreme.combined, *extreme.log_p_window);
}

TEST(Stage, Names) {
  for (Stage s : {Stage::point, Stage::subwindow, Stage::window, Stage::combined}) {
    EXPECT_EQ(parse_stage(to_string(s)), s);
  }
  EXPECT_EQ(to_string(Stage::window), "window");
  EXPECT_THROW(parse_stage("bogus"), InvalidArgument);
}

TEST(Detector, FiniteModeStagesAndAdditivity) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  auto state = warm(model, cfg);
  const std::int64_t t0 = state.interval_index * 60;
  std::vector<ScoreRecord> all;
  for (int j = 0; j < 12; ++j) {
    const auto r = stream_step(state, model, Event{t0 + j * 5, -1.0 + 0.2 * j});
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].stage, Stage::point);
    all.insert(all.end(), r.begin(), r.end());
  }
  const auto close = stream_step(state, model, EndOfWindow{});
  ASSERT_EQ(close.size(), 2u);
  EXPECT_EQ(close[0].stage, Stage::window);
  EXPECT_EQ(close[1].stage, Stage::combined);
  EXPECT_DOUBLE_EQ(close[1].log_p, close[0].log_p + all.back().log_p);
  EXPECT_EQ(close[1].flagged, close[0].flagged);
  EXPECT_EQ(state.interval_index, 5);
  EXPECT_TRUE(stream_step(state, model, EndOfWindow{}).empty());
}

TEST(Detector, SubwindowCadence) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  cfg.subwindow = 15;
  auto state = warm(model, cfg);
  const std::int64_t t0 = state.interval_index * 60;
  std::vector<std::size_t> at;
  for (int j = 0; j < 60; ++j) {
    const auto r = stream_step(state, model, Event{t0 + j, 0.05 * j - 1.5});
    if (count_stage(r, Stage::subwindow) == 1) at.push_back(static_cast<std::size_t>(j + 1));
  }
  EXPECT_EQ(at, (std::vector<std::size_t>{15, 30, 45, 60}));
  const auto close = stream_step(state, model, EndOfWindow{});
  EXPECT_EQ(count_stage(close, Stage::window), 1u);
  EXPECT_EQ(state.sub_index, 0u);
}

TEST(Detector, SingleModeEmitsPointsOnly) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.mode = DetectMode::single;
  auto state = warm(model, cfg);
  std::vector<ScoreRecord> all;
  for (int t = 0; t < 5; ++t) {
    auto r = stream_step(state, model, Event{(state.interval_index) * 60 + 10, 0.3 * t});
    all.insert(all.end(), r.begin(), r.end());
    r = stream_step(state, model, EndOfWindow{});
    all.insert(all.end(), r.begin(), r.end());
  }
  EXPECT_EQ(all.size(), 5u);
  EXPECT_EQ(count_stage(all, Stage::point), 5u);
}

TEST(Detector, AsymptoticModeRejectsEvents) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.mode = DetectMode::asymptotic;
  cfg.samples = 200;
  auto state = warm(model, cfg);
  EXPECT_THROW(stream_step(state, model, Event{0, 0.0}), InvalidArgument);
  const auto r = stream_step(state, model, Distribution{state.interval_index, std::vector<double>(6, 1.0 / 6)});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].stage, Stage::window);
  EXPECT_EQ(r[1].log_p, r[0].log_p);
}

TEST(Detector, LateEventsAreRejected) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  auto state = warm(model, cfg);
  stream_step(state, model, Event{state.interval_index * 60 + 61, 0.0});
  try {
    stream_step(state, model, Event{0, 1.5});
    FAIL();
  } catch (const LateEvent& e) {
    EXPECT_EQ(e.timestamp(), 0);
    EXPECT_EQ(e.value(), 1.5);
  }
}

TEST(Detector, GapsCloseEmptyIntervals) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  auto state = warm(model, cfg);
  const auto start = state.interval_index;
  stream_step(state, model, Event{start * 60, 0.0});
  const auto r = stream_step(state, model, Event{(start + 3) * 60, 0.0});
  // one closed interval with data, two empty ones, then the new point
  EXPECT_EQ(count_stage(r, Stage::window), 1u);
  EXPECT_EQ(count_stage(r, Stage::point), 1u);
  EXPECT_EQ(r.back().interval_index, start + 3);
  EXPECT_EQ(state.interval_index, start + 3);
}

TEST(Detector, ColdStartWarmsUpSilently) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  auto state = cold_start(model, cfg, 10, 13);
  std::vector<ScoreRecord> all;
  for (std::int64_t t = 10; t < 15; ++t) {
    for (int j = 0; j < 3; ++j) {
      auto r = stream_step(state, model, Event{t * 60 + j, 0.4 * j - 0.4});
      all.insert(all.end(), r.begin(), r.end());
    }
    auto r = stream_step(state, model, EndOfWindow{});
    all.insert(all.end(), r.begin(), r.end());
  }
  ASSERT_FALSE(all.empty());
  EXPECT_EQ(all.front().interval_index, 13);
  EXPECT_EQ(count_stage(all, Stage::window), 2u);
  EXPECT_THROW(cold_start(model, cfg, 10, 10), InvalidArgument);
}

TEST(Detector, BatchMatchesStream) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 300;
  cfg.seed = 77;
  cfg.subwindow = 4;
  const auto start = warm(model, cfg);
  std::vector<IntervalData> ivs;
  Rng rng(12);
  for (std::int64_t t = start.interval_index; t < start.interval_index + 8; ++t) {
    if (t == start.interval_index + 3) continue;
    IntervalData iv{t, {}, {}};
    for (int j = 0; j < 9; ++j) iv.values.push_back(rng.normal());
    ivs.push_back(iv);
  }
  const auto batch = detect_batch(start, model, ivs);
  auto state = start;
  std::vector<ScoreRecord> stream;
  for (const auto& in : to_stream(ivs, cfg.mode, model.covariates.window_seconds)) {
    auto r = stream_step(state, model, in);
    stream.insert(stream.end(), r.begin(), r.end());
  }
  EXPECT_EQ(batch, stream);
}

TEST(Detector, ToStreamShapes) {
  std::vector<IntervalData> ivs{{2, {0.1, 0.2}, {}}, {3, {0.3}, {}}};
  const auto s = to_stream(ivs, DetectMode::finite, 60);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(std::get<Event>(s[0]).timestamp, 120);
  EXPECT_TRUE(std::holds_alternative<EndOfWindow>(s[2]));
  EXPECT_EQ(std::get<Event>(s[3]).timestamp, 180);
  std::vector<IntervalData> dist{{4, {}, {0.5, 0.5}}};
  const auto a = to_stream(dist, DetectMode::asymptotic, 60);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(std::get<Distribution>(a[0]).interval_index, 4);
}

TEST(Persistence, MidWindowRestoreContinuesIdentically) {
  const auto model = small_model();
  DetectorConfig cfg;
  cfg.samples = 200;
  cfg.subwindow = 3;
  auto a = warm(model, cfg);
  const std::int64_t t0 = a.interval_index * 60;
  for (int j = 0; j < 4; ++j) stream_step(a, model, Event{t0 + j, 0.1 * j});
  auto b = deserialize_state(serialize_state(a));
  EXPECT_EQ(a, b);
  for (int j = 4; j < 30; ++j) {
    const Event e{t0 + j * 7, std::sin(static_cast<double>(j))};
    EXPECT_EQ(stream_step(a, model, e), stream_step(b, model, e));
  }
  EXPECT_EQ(stream_step(a, model, EndOfWindow{}), stream_step(b, model, EndOfWindow{}));
}

TEST(Persistence, FileRoundTrip) {
  const auto model = small_model();
  DetectorConfig cfg;
  const auto s = warm(model, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "distad_state_test.bin").string();
  save_state(s, path);
  EXPECT_EQ(load_state(path), s);
  std::filesystem::remove(path);
  EXPECT_THROW(load_state(path), Error);
}

TEST(Persistence, CorruptionIsDetected) {
  const auto model = small_model();
  DetectorConfig cfg;
  const auto bytes = serialize_state(warm(model, cfg));
  for (std::size_t i : {std::size_t{0}, std::size_t{5}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[i] ^= 0x5a;
    EXPECT_THROW(deserialize_state(bad), StateCorrupt);
  }
  EXPECT_THROW(deserialize_state(std::span(bytes).first(bytes.size() - 3)), StateCorrupt);
  EXPECT_THROW(deserialize_state(std::vector<std::uint8_t>{}), StateCorrupt);
}

TEST(Persistence, DimensionDriftIsStateCorrupt) {
  const auto model = small_model(6);
  DetectorConfig cfg;
  auto state = warm(model, cfg);
  const auto other = small_model(8);
  EXPECT_THROW(stream_step(state, other, EndOfWindow{}), StateCorrupt);
  ScoringModel shifted = model;
  shifted.grid = make_regular_grid(-2.0, 2.0, 6);
  EXPECT_THROW(stream_step(state, shifted, EndOfWindow{}), StateCorrupt);
}

TEST(Config, Validation) {
  DetectorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.samples = 10;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(McEta, ConvergesToExactWithSamples) {
  const ConcentrationVector alpha({0.6, 2.0, 1.4});
  std::vector<Outcome> outcomes;
  for (std::uint32_t a = 0; a <= 3; ++a) {
    for (std::uint32_t b = 0; a + b <= 3; ++b) {
      const std::vector<std::uint32_t> m{a, b, 3 - a - b};
      const double l = dirmult_logpmf(m, 3, alpha).value;
      outcomes.push_back({l, std::exp(l)});
    }
  }
  const double exact = exact_eta(outcomes, 0.1).log_eta;
  Rng rng(50);
  EXPECT_NEAR(mc_eta(alpha, Regime{3}, 0.1, 200000, rng).log_eta, exact, 1e-12);
}

TEST(Throughput, ThousandIntervalsPerSecondAtOneHundredBins) {
  // d = 100, 2 x 40 units, 30 events per interval. Monte Carlo window closes
  // are timed separately and left out of the rate.
  CovariateSpec cov;
  cov.window_seconds = 60;
  const ScoringModel model{ModelParams::initialized(ModelDims{100, cov.width(), 40, 2}, 5),
                           make_regular_grid(-3.0, 3.0, 100), cov};
  DetectorConfig cfg;
  cfg.samples = 100;
  auto state = warm(model, cfg);
  Rng rng(9);
  constexpr int kIntervals = 1000;
  using clock = std::chrono::steady_clock;
  clock::duration events{}, closes{};
  std::size_t records = 0;
  for (int k = 0; k < kIntervals; ++k) {
    const std::int64_t t0 = state.interval_index * 60;
    const auto a = clock::now();
    for (int j = 0; j < 30; ++j) records += stream_step(state, model, Event{t0 + j, rng.normal()}).size();
    const auto b = clock::now();
    records += stream_step(state, model, EndOfWindow{}).size();
    events += b - a;
    closes += clock::now() - b;
  }
  EXPECT_EQ(records, static_cast<std::size_t>(kIntervals) * 32u);

  // The recurrent step that every close performs, without the Monte Carlo part.
  HiddenState h = HiddenState::zeros(model.params.dims());
  const std::vector<double> z(100, 0.01);
  const auto a = clock::now();
  for (int k = 0; k < kIntervals; ++k) {
    const auto x = time_features(cov, k);
    h = step(model.params, h, z, x).state;
  }
  const auto recurrent = clock::now() - a;

  const double secs = std::chrono::duration<double>(events + recurrent).count();
  const double rate = kIntervals / secs;
  RecordProperty("intervals_per_second", std::to_string(rate));
  RecordProperty("close_seconds", std::to_string(std::chrono::duration<double>(closes).count()));
  EXPECT_GE(rate, 1000.0) << rate << " intervals/s";
}

TEST(Properties, LevelSetCoverage) {
  const auto r = distad::testing::level_set_coverage(41);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Properties, MonteCarloDisagreementsSitAtTheBoundary) {
  const auto r = distad::testing::mc_eta_boundary_consistency(42, 200, 100000);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Properties, StreamBatchEquivalence) {
  const auto r = distad::testing::stream_batch_equivalence(43);
  EXPECT_TRUE(r.pass) << r.detail;
}

TEST(Properties, StateSizeBound) {
  const auto r = distad::testing::state_size_bound();
  EXPECT_TRUE(r.pass) << r.detail;
}
