// SPDX-License-Identifier: Apache-2.0
#include "distad/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "distad/error.hpp"

namespace distad {

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("roc_auc: length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw InvalidArgument("roc_auc: NaN score");
    pos += labels[i] ? 1 : 0;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetric("roc_auc: need both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of the positives keeps tied (half-integer) ranks exact.
  double twice_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t pos_in_tie = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      pos_in_tie += labels[order[j]] ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j share the average (i + 1 + j) / 2
    twice_rank_sum += static_cast<double>(pos_in_tie) * static_cast<double>(i + 1 + j);
    i = j;
  }
  const double P = static_cast<double>(pos), N = static_cast<double>(neg);
  const double u = 0.5 * twice_rank_sum - P * (P + 1.0) / 2.0;
  return u / (P * N);
}

RateReport fpr_recall(const std::vector<bool>& flags, const std::vector<bool>& labels,
                      const std::vector<bool>& exclude) {
  if (flags.size() != labels.size() || (!exclude.empty() && exclude.size() != flags.size())) {
    throw InvalidArgument("fpr_recall: length mismatch");
  }
  std::size_t negatives = 0, false_pos = 0, positives = 0, true_pos = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (!exclude.empty() && exclude[i]) continue;
    if (labels[i]) {
      ++positives;
      true_pos += flags[i] ? 1 : 0;
    } else {
      ++negatives;
      false_pos += flags[i] ? 1 : 0;
    }
  }
  RateReport r;
  r.fpr = negatives ? 100.0 * static_cast<double>(false_pos) / static_cast<double>(negatives) : 0.0;
  if (positives) r.recall = 100.0 * static_cast<double>(true_pos) / static_cast<double>(positives);
  return r;
}

MeanStd summarize(std::vector<double> values) {
  MeanStd m;
  m.count = values.size();
  if (values.empty()) return m;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / (n - 1.0));
  }
  return m;
}

// ---------------------------------------------------------------------------

std::string Scenario::name() const {
  return std::string(regime == ObservationRegime::asymptotic ? "asymp-" : "finite-") +
         scenario_name(dynamics, malfunction);
}

Scenario Scenario::parse(const std::string& name) {
  for (auto regime : {ObservationRegime::asymptotic, ObservationRegime::finite}) {
    for (auto dyn : {SynthDynamics::ds1, SynthDynamics::ds2}) {
      for (auto mal : {Malfunction::none, Malfunction::mu_shift, Malfunction::sigma_collapse}) {
        const Scenario s{regime, dyn, mal};
        if (s.name() == name) return s;
      }
    }
  }
  throw InvalidArgument("unknown scenario '" + name + "'");
}

std::vector<Scenario> standard_scenarios(ObservationRegime regime) {
  std::vector<Scenario> out;
  for (auto dyn : {SynthDynamics::ds1, SynthDynamics::ds2}) {
    if (regime == ObservationRegime::asymptotic) out.push_back({regime, dyn, Malfunction::none});
    out.push_back({regime, dyn, Malfunction::mu_shift});
    out.push_back({regime, dyn, Malfunction::sigma_collapse});
  }
  return out;
}

TrainingConfig ExperimentConfig::default_experiment_training() {
  TrainingConfig t;
  t.projection_lr_scale = 10.0;
  return t;
}

namespace {

std::uint64_t observations_fingerprint(std::span<const BinnedObservation> obs) {
  std::uint64_t h = mix64(obs.size());
  for (const auto& o : obs) {
    for (auto c : o.counts()) h = mix64(h ^ c);
    for (double p : o.probs()) h = mix64(h ^ std::bit_cast<std::uint64_t>(p));
  }
  return h;
}

SynthConfig synth_config(const ExperimentConfig& c, const Scenario& s, std::uint64_t seed) {
  SynthConfig sc;
  sc.dynamics = s.dynamics;
  sc.malfunction = s.malfunction;
  sc.learn_length = c.learn_length;
  sc.detect_length = c.detect_length;
  sc.noise_scale = c.noise_scale;
  sc.seed = seed;
  if (s.regime == ObservationRegime::finite) sc.samples_per_interval = c.samples_per_interval;
  return sc;
}

}  // namespace

ExperimentRunner::ExperimentRunner(ExperimentConfig config) : config_(std::move(config)) {
  config_.training.validate();
  if (config_.runs == 0) throw InvalidArgument("ExperimentConfig: runs must be positive");
}

const TrainResult& ExperimentRunner::model_for(const Scenario& s, std::uint64_t seed,
                                               const TrainingSeries& series) {
  const std::uint64_t print = observations_fingerprint(series.observations);
  for (const auto& c : cache_) {
    if (c.regime == s.regime && c.dynamics == s.dynamics && c.seed == seed &&
        c.data_fingerprint == print) {
      return c.result;
    }
  }
  TrainingConfig tc = config_.training;
  tc.seed = seed;
  // Only the most recent model per regime and dynamics is worth keeping.
  std::erase_if(cache_, [&](const CachedModel& c) {
    return c.regime == s.regime && c.dynamics == s.dynamics;
  });
  cache_.push_back({s.regime, s.dynamics, seed, print, train(tc, std::span(&series, 1))});
  return cache_.back().result;
}

RunResult ExperimentRunner::run(const Scenario& scenario, std::uint64_t seed) {
  const SynthConfig sc = synth_config(config_, scenario, seed);
  const LabeledSeries series = generate(sc);
  const auto values = learning_values(series);
  const Support support = default_support(values, config_.support_margin);
  const bool asymptotic = scenario.regime == ObservationRegime::asymptotic;
  const BinGrid grid = asymptotic
                           ? make_regular_grid(support.y_min, support.y_max, config_.asymptotic_bins)
                           : make_quantile_grid(values, config_.finite_bins, support);
  const auto obs = to_observations(series, grid);
  const CovariateSpec covariates;
  const std::size_t T = sc.learn_length;

  TrainingSeries training{{obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(T)},
                          time_features(covariates, 0, T)};
  const TrainResult& trained = model_for(scenario, seed, training);

  const ScoringModel model{trained.params, grid, covariates};
  DetectorConfig dc;
  dc.mode = asymptotic ? DetectMode::asymptotic : DetectMode::finite;
  dc.epsilon = config_.epsilon;
  dc.samples = config_.mc_samples;
  dc.seed = seed;
  const DetectorState start = warm_start(model, dc, std::span(obs).first(T), 0);

  std::vector<IntervalData> intervals;
  intervals.reserve(series.size() - T);
  for (std::size_t t = T; t < series.size(); ++t) {
    IntervalData iv{static_cast<std::int64_t>(t), {}, {}};
    if (asymptotic) {
      iv.probs.assign(obs[t].probs().begin(), obs[t].probs().end());
    } else {
      iv.values = series.samples[t];
    }
    intervals.push_back(std::move(iv));
  }
  const auto records = detect_batch(start, model, intervals);

  const std::size_t D = series.size() - T;
  std::vector<bool> flags(D, false), labels(D, false);
  for (std::size_t i = 0; i < D; ++i) labels[i] = series.malfunction[T + i];
  std::vector<double> window_log_p(D, 0.0);
  for (const auto& r : records) {
    if (r.stage != Stage::window) continue;
    const auto i = static_cast<std::size_t>(r.interval_index) - T;
    flags[i] = r.flagged;
    window_log_p[i] = r.log_p;
  }

  std::vector<double> scores;
  std::vector<bool> score_labels;
  for (const auto& r : records) {
    const auto i = static_cast<std::size_t>(r.interval_index) - T;
    if (asymptotic && r.stage == Stage::combined) {
      scores.push_back(-r.log_p);
      score_labels.push_back(labels[i]);
    } else if (!asymptotic && r.stage == Stage::point) {
      scores.push_back(-(r.log_p + window_log_p[i]));
      score_labels.push_back(labels[i]);
    }
  }

  RunResult result;
  result.seed = seed;
  result.train_nll = trained.best_loss;
  result.rates = fpr_recall(flags, labels);
  if (std::find(labels.begin(), labels.end(), true) != labels.end()) {
    result.auc = roc_auc(scores, score_labels);
  }
  return result;
}

ScenarioReport ExperimentRunner::run_scenario(const Scenario& scenario) {
  ScenarioReport report;
  report.scenario = scenario;
  std::vector<double> fpr, recall, auc;
  for (std::size_t k = 0; k < config_.runs; ++k) {
    RunResult r = run(scenario, config_.first_seed + k);
    if (progress_) progress_(scenario, r);
    fpr.push_back(r.rates.fpr);
    if (r.rates.recall) recall.push_back(*r.rates.recall);
    if (r.auc) auc.push_back(*r.auc);
    report.runs.push_back(std::move(r));
  }
  report.fpr = summarize(fpr);
  if (!recall.empty()) report.recall = summarize(recall);
  if (!auc.empty()) report.auc = summarize(auc);
  return report;
}

std::vector<ScenarioReport> ExperimentRunner::run_all() {
  // Seed-major order lets scenarios sharing a learning range reuse one model.
  std::vector<std::vector<RunResult>> runs(config_.scenarios.size());
  for (std::size_t k = 0; k < config_.runs; ++k) {
    for (std::size_t i = 0; i < config_.scenarios.size(); ++i) {
      RunResult r = run(config_.scenarios[i], config_.first_seed + k);
      if (progress_) progress_(config_.scenarios[i], r);
      runs[i].push_back(std::move(r));
    }
  }
  std::vector<ScenarioReport> reports;
  for (std::size_t i = 0; i < config_.scenarios.size(); ++i) {
    ScenarioReport report;
    report.scenario = config_.scenarios[i];
    std::vector<double> fpr, recall, auc;
    for (const auto& r : runs[i]) {
      fpr.push_back(r.rates.fpr);
      if (r.rates.recall) recall.push_back(*r.rates.recall);
      if (r.auc) auc.push_back(*r.auc);
    }
    report.runs = std::move(runs[i]);
    report.fpr = summarize(fpr);
    if (!recall.empty()) report.recall = summarize(recall);
    if (!auc.empty()) report.auc = summarize(auc);
    reports.push_back(std::move(report));
  }
  return reports;
}

std::vector<ScenarioReport> run_experiment(const ExperimentConfig& config) {
  ExperimentRunner runner(config);
  return runner.run_all();
}

std::string format_reports(std::span<const ScenarioReport> reports) {
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(20) << "scenario" << std::setw(18) << "FPR (%)" << std::setw(18)
     << "recall (%)" << "AUC\n";
  for (const auto& r : reports) {
    auto cell = [&](const std::optional<MeanStd>& m, int precision) {
      std::ostringstream c;
      c << std::fixed << std::setprecision(precision);
      if (m) {
        c << m->mean << " +- " << m->std;
      } else {
        c << "-";
      }
      return c.str();
    };
    os << std::setw(20) << r.scenario.name() << std::setw(18) << cell(r.fpr, 2) << std::setw(18)
       << cell(r.recall, 2) << cell(r.auc, 4) << "\n";
  }
  return os.str();
}

std::string reports_to_json(std::span<const ScenarioReport> reports) {
  using nlohmann::json;
  auto stat = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}, {"n", m.count}}; };
  json out = json::array();
  for (const auto& r : reports) {
    json j;
    j["scenario"] = r.scenario.name();
    j["fpr"] = stat(r.fpr);
    j["recall"] = r.recall ? stat(*r.recall) : json(nullptr);
    j["auc"] = r.auc ? stat(*r.auc) : json(nullptr);
    json runs = json::array();
    for (const auto& run : r.runs) {
      runs.push_back({{"seed", run.seed},
                      {"fpr", run.rates.fpr},
                      {"recall", run.rates.recall ? json(*run.rates.recall) : json(nullptr)},
                      {"auc", run.auc ? json(*run.auc) : json(nullptr)},
                      {"train_nll", run.train_nll}});
    }
    j["runs"] = std::move(runs);
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

// ---------------------------------------------------------------------------

std::vector<PointRunResult> run_point_experiment(const PointExperimentConfig& config) {
  if (config.runs == 0) throw InvalidArgument("PointExperimentConfig: runs must be positive");
  std::vector<PointRunResult> out;
  const CovariateSpec covariates;
  for (std::size_t k = 0; k < config.runs; ++k) {
    const std::uint64_t seed = config.first_seed + k;
    PointSeriesConfig pc = config.series;
    pc.seed = seed;
    const PointSeries series = generate_point_series(pc);
    const std::size_t T = series.learn_length;
    const std::span<const double> learn(series.values.data(), T);
    const Support support = default_support(learn, config.support_margin);
    const BinGrid grid = make_regular_grid(support.y_min, support.y_max, config.bins);

    std::vector<BinnedObservation> obs;
    obs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      obs.push_back(bin_samples(std::span(&series.values[t], 1), grid, static_cast<std::int64_t>(t)));
    }
    TrainingConfig tc = config.training;
    tc.seed = seed;
    const TrainingSeries training{obs, time_features(covariates, 0, T)};
    const TrainResult trained = train(tc, std::span(&training, 1));

    const ScoringModel model{trained.params, grid, covariates};
    DetectorConfig dc;
    dc.mode = DetectMode::single;
    dc.seed = seed;
    const DetectorState start = warm_start(model, dc, obs, 0);
    std::vector<IntervalData> intervals;
    for (std::size_t t = T; t < series.values.size(); ++t) {
      intervals.push_back({static_cast<std::int64_t>(t), {series.values[t]}, {}});
    }
    const auto records = detect_batch(start, model, intervals);

    const std::size_t D = series.values.size() - T;
    std::vector<double> scores(D, 0.0);
    std::vector<bool> flags(D, false), labels(D, false);
    for (std::size_t i = 0; i < D; ++i) labels[i] = series.anomaly[T + i];
    for (const auto& r : records) {
      const auto i = static_cast<std::size_t>(r.interval_index) - T;
      scores[i] = -r.log_p;
      flags[i] = r.flagged;
    }
    PointRunResult res;
    res.seed = seed;
    res.auc = roc_auc(scores, labels);
    res.rates = fpr_recall(flags, labels);
    out.push_back(res);
  }
  return out;
}

}  // namespace distad
