// SPDX-License-Identifier: Apache-2.0
// distad: simulate | train | detect | evaluate | experiment

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "distad/covariates.hpp"
#include "distad/detect.hpp"
#include "distad/dynamics.hpp"
#include "distad/error.hpp"
#include "distad/eval.hpp"
#include "distad/grid.hpp"
#include "distad/io.hpp"
#include "distad/synth.hpp"
#include "json.hpp"
#include "json_config.hpp"

namespace fs = std::filesystem;

namespace distad::cli {
namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

/// Invalid command-line usage detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string metric_name(const std::string& path) {
  if (path == "-") return "series";
  return fs::path(path).stem().string();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

double parse_number(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("invalid number '" + std::string(s) + "'", line);
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool blank_or_comment(std::string_view line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

std::ofstream open_output(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::size_t learn = 1500;
  std::size_t detect = 2000;
  double noise = 0.1;
  std::uint32_t samples_per_interval = 60;
  std::size_t quantiles = 1000;
  int period = 24;
  std::int64_t window = 3600;
};

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path.string());
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

int cmd_simulate(const SimulateOptions& o) {
  if (o.window <= 0) throw UsageError("--window must be positive");
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream series;
  std::vector<std::pair<std::int64_t, bool>> labels;
  std::size_t intervals = 0;
  if (o.scenario == "single") {
    PointSeriesConfig pc;
    pc.period = o.period;
    pc.learn_length = o.learn;
    pc.detect_length = o.detect;
    pc.noise_scale = o.noise;
    pc.seed = o.seed;
    const PointSeries s = generate_point_series(pc);
    std::vector<Event> events;
    for (std::size_t t = 0; t < s.values.size(); ++t) {
      events.push_back({static_cast<std::int64_t>(t) * o.window, s.values[t]});
      labels.emplace_back(static_cast<std::int64_t>(t), s.anomaly[t]);
    }
    write_sample_series(series, events);
    intervals = s.values.size();
  } else {
    Scenario scenario;
    try {
      scenario = Scenario::parse(o.scenario);
    } catch (const InvalidArgument&) {
      throw UsageError("unknown scenario '" + o.scenario + "'");
    }
    SynthConfig sc;
    sc.dynamics = scenario.dynamics;
    sc.malfunction = scenario.malfunction;
    sc.period = o.period;
    sc.learn_length = o.learn;
    sc.detect_length = o.detect;
    sc.noise_scale = o.noise;
    sc.quantile_count = o.quantiles;
    sc.seed = o.seed;
    if (scenario.regime == ObservationRegime::finite) sc.samples_per_interval = o.samples_per_interval;
    const LabeledSeries s = generate(sc);
    intervals = s.size();
    for (std::size_t t = 0; t < s.size(); ++t) {
      labels.emplace_back(static_cast<std::int64_t>(t), s.malfunction[t]);
    }
    if (s.asymptotic()) {
      std::vector<std::int64_t> ts(s.size());
      for (std::size_t t = 0; t < ts.size(); ++t) ts[t] = static_cast<std::int64_t>(t) * o.window;
      write_quantile_series(series, ts, s.quantiles);
    } else {
      std::vector<Event> events;
      for (std::size_t t = 0; t < s.size(); ++t) {
        const auto& v = s.samples[t];
        for (std::size_t j = 0; j < v.size(); ++j) {
          const auto offset = static_cast<std::int64_t>(j) * o.window / static_cast<std::int64_t>(v.size());
          events.push_back({static_cast<std::int64_t>(t) * o.window + offset, v[j]});
        }
      }
      write_sample_series(series, events);
    }
  }
  write_text(dir / "series.csv", series.str());
  std::ostringstream lab;
  write_labels(lab, labels);
  write_text(dir / "labels.csv", lab.str());
  std::cout << "wrote " << intervals << " intervals to " << (dir / "series.csv").string() << " and "
            << (dir / "labels.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::vector<std::string> data;
  std::string out;
  std::string mode = "auto";
  std::string grid = "auto";
  std::size_t bins = 0;
  std::optional<double> support_min;
  std::optional<double> support_max;
  double margin = 0.05;
  double train_fraction = 0.4;
  std::optional<std::size_t> learn_intervals;
  std::int64_t window = 3600;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> projection_lr_scale;
  std::optional<double> clip;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> context;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> layers;
  std::uint64_t seed = 0;
  bool verbose = false;
};

struct LoadedSeries {
  std::string id;
  SeriesData data;
  std::vector<IntervalData> sample_intervals;  // sample files only
  std::int64_t first_interval = 0;
  std::size_t interval_count = 0;
};

LoadedSeries load_series(const std::string& path, std::int64_t window) {
  LoadedSeries s;
  s.id = metric_name(path);
  if (path == "-") {
    s.data = read_series(std::cin, "stdin");
  } else {
    s.data = read_series_file(path);
  }
  if (s.data.has_quantiles()) {
    const auto first = floor_div(s.data.timestamps.front(), window);
    const auto last = floor_div(s.data.timestamps.back(), window);
    s.first_interval = first;
    s.interval_count = static_cast<std::size_t>(last - first + 1);
  } else {
    s.sample_intervals = intervals_from_events(s.data.events, window);
    if (!s.sample_intervals.empty()) s.first_interval = s.sample_intervals.front().interval_index;
    s.interval_count = s.sample_intervals.size();
  }
  return s;
}

DetectMode infer_mode(const std::vector<LoadedSeries>& all) {
  if (all.front().data.has_quantiles()) return DetectMode::asymptotic;
  for (const auto& s : all) {
    for (const auto& iv : s.sample_intervals) {
      if (iv.values.size() > 1) return DetectMode::finite;
    }
  }
  return DetectMode::single;
}

void check_series_mode(const LoadedSeries& s, DetectMode mode) {
  if (s.data.has_quantiles() != (mode == DetectMode::asymptotic)) {
    throw InvalidArgument(s.id + ": " +
                          (mode == DetectMode::asymptotic ? "asymptotic mode needs quantile rows"
                                                          : "sample rows expected, got quantile rows"));
  }
  if (mode != DetectMode::single) return;
  for (const auto& iv : s.sample_intervals) {
    if (iv.values.size() > 1) {
      throw InvalidArgument(s.id + ": single mode allows one sample per interval (interval " +
                            std::to_string(iv.interval_index) + " has " +
                            std::to_string(iv.values.size()) + ")");
    }
  }
}

int cmd_train(const TrainOptions& o) {
  if (o.data.empty()) throw UsageError("train: no --data given");
  if (o.window <= 0) throw UsageError("--window must be positive");
  if (!(o.train_fraction > 0.0 && o.train_fraction <= 1.0)) {
    throw UsageError("--train-fraction must lie in (0, 1]");
  }
  std::vector<LoadedSeries> all;
  for (const auto& path : o.data) {
    auto s = load_series(path, o.window);
    if (s.interval_count == 0) continue;
    all.push_back(std::move(s));
  }
  if (all.empty()) throw UsageError("train: the data contains no observations");

  const DetectMode mode = o.mode == "auto" ? infer_mode(all) : parse_mode(o.mode);
  for (const auto& s : all) check_series_mode(s, mode);

  std::vector<std::size_t> learn(all.size());
  std::vector<double> pooled;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto n = all[i].interval_count;
    std::size_t L = o.learn_intervals.value_or(
        static_cast<std::size_t>(std::floor(o.train_fraction * static_cast<double>(n))));
    L = std::min(L, n);
    if (L < 2) throw InvalidArgument(all[i].id + ": fewer than 2 learning intervals");
    learn[i] = L;
    const auto end = all[i].first_interval + static_cast<std::int64_t>(L);
    if (mode == DetectMode::asymptotic) {
      const auto& d = all[i].data;
      for (std::size_t r = 0; r < d.quantiles.size(); ++r) {
        if (floor_div(d.timestamps[r], o.window) >= end) break;
        pooled.insert(pooled.end(), d.quantiles[r].begin(), d.quantiles[r].end());
      }
    } else {
      for (std::size_t t = 0; t < L; ++t) {
        const auto& v = all[i].sample_intervals[t].values;
        pooled.insert(pooled.end(), v.begin(), v.end());
      }
    }
  }
  if (pooled.empty()) throw InvalidArgument("train: no values in the learning range");

  Support support = default_support(pooled, o.margin);
  if (o.support_min) support.y_min = *o.support_min;
  if (o.support_max) support.y_max = *o.support_max;
  if (!(support.y_min < support.y_max)) throw UsageError("support minimum must be below its maximum");

  std::string grid_kind = o.grid;
  if (grid_kind == "auto") grid_kind = mode == DetectMode::finite ? "quantile" : "regular";
  std::size_t bins = o.bins;
  if (bins == 0) bins = mode == DetectMode::asymptotic ? 30 : mode == DetectMode::finite ? 10 : 100;
  BinGrid grid = grid_kind == "regular" ? make_regular_grid(support.y_min, support.y_max, bins)
                                        : make_quantile_grid(pooled, bins, support);

  CovariateSpec covariates;
  covariates.window_seconds = o.window;

  std::vector<TrainingSeries> corpus;
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::vector<IntervalData> intervals;
    if (mode == DetectMode::asymptotic) {
      intervals = intervals_from_quantiles(all[i].data, grid, o.window);
    } else {
      intervals = all[i].sample_intervals;
    }
    intervals.resize(learn[i]);
    corpus.push_back({observations_from_intervals(intervals, grid, mode == DetectMode::asymptotic),
                      time_features(covariates, all[i].first_interval, learn[i])});
  }

  TrainingConfig tc = mode == DetectMode::single ? TrainingConfig{}
                                                 : ExperimentConfig::default_experiment_training();
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.lr) tc.learning_rate = *o.lr;
  if (o.projection_lr_scale) tc.projection_lr_scale = *o.projection_lr_scale;
  if (o.clip) tc.clip_norm = *o.clip;
  if (o.batch) tc.batch_size = *o.batch;
  if (o.context) tc.context_length = *o.context;
  if (o.hidden) tc.hidden = *o.hidden;
  if (o.layers) tc.layers = *o.layers;
  tc.seed = o.seed;
  tc.validate();

  EpochCallback progress;
  if (o.verbose) {
    progress = [](int epoch, double nll) { std::cerr << "epoch " << epoch << " nll " << nll << '\n'; };
  }
  TrainResult result = train(tc, corpus, progress);

  ModelBundle bundle{grid, result.params, covariates, tc, mode};
  bundle.train_fraction = o.train_fraction;
  bundle.warmup_intervals = learn.front();
  bundle.final_nll = result.best_loss;
  save_model(bundle, o.out);
  std::cout << "mode " << to_string(mode) << ", " << grid.bin_count() << " bins, " << corpus.size()
            << " series, best epoch " << result.best_epoch << '\n';
  std::cout << "final_nll " << result.best_loss << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// detect

struct DetectOptions {
  std::string model;
  std::vector<std::string> data;
  std::optional<std::string> stream;
  std::string metric_id;
  std::string out = "-";
  double epsilon = 0.05;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::uint32_t subwindow = 0;
  std::optional<std::uint64_t> warmup;
  std::optional<std::string> checkpoint;
  std::size_t checkpoint_every = 1;
  bool resume = false;
  std::optional<std::uint64_t> limit_lines;
};

DetectorConfig detector_config(const DetectOptions& o, const ModelBundle& m) {
  DetectorConfig dc;
  dc.mode = m.mode;
  dc.epsilon = o.epsilon;
  dc.samples = o.samples;
  dc.seed = o.seed;
  dc.subwindow = o.subwindow;
  try {
    dc.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return dc;
}

void detect_batch_files(const DetectOptions& o, const ModelBundle& m, std::ostream& out) {
  const ScoringModel model = m.scoring();
  const DetectorConfig dc = detector_config(o, m);
  const std::uint64_t warmup = o.warmup.value_or(m.warmup_intervals);
  if (warmup == 0) throw UsageError("--warmup must be at least 1");
  const std::int64_t window = m.covariates.window_seconds;
  write_score_header(out);
  for (const auto& path : o.data) {
    LoadedSeries s = load_series(path, window);
    if (s.interval_count == 0) continue;
    check_series_mode(s, m.mode);
    const bool asymptotic = m.mode == DetectMode::asymptotic;
    std::vector<IntervalData> intervals =
        asymptotic ? intervals_from_quantiles(s.data, m.grid, window) : std::move(s.sample_intervals);
    if (intervals.size() <= warmup) {
      std::cerr << s.id << ": " << intervals.size() << " intervals, none past the warm-up\n";
      continue;
    }
    const auto history = observations_from_intervals(
        std::span(intervals).first(static_cast<std::size_t>(warmup)), m.grid, asymptotic);
    const DetectorState start = warm_start(model, dc, history, intervals.front().interval_index);
    const auto records =
        detect_batch(start, model, std::span(intervals).subspan(static_cast<std::size_t>(warmup)));
    for (const auto& r : records) write_score(out, s.id, r);
  }
}

/// Per-metric detectors fed from a line stream.
class StreamSession {
 public:
  StreamSession(const ModelBundle& m, DetectorConfig dc, std::uint64_t warmup)
      : bundle_(m), model_(m.scoring()), config_(dc), warmup_(warmup) {}

  void restore(std::vector<std::pair<std::string, DetectorState>> metrics) {
    for (auto& [id, state] : metrics) {
      if (state.grid_fingerprint != model_.grid.fingerprint()) {
        throw StateCorrupt("checkpoint for metric " + id + " belongs to another grid");
      }
      if (!(state.config == config_)) {
        throw UsageError("checkpoint was written with different detector settings");
      }
      index_[id] = order_.size();
      order_.push_back(id);
      states_.push_back(std::move(state));
    }
  }

  std::vector<std::pair<std::string, DetectorState>> snapshot() const {
    std::vector<std::pair<std::string, DetectorState>> out;
    for (std::size_t i = 0; i < order_.size(); ++i) out.emplace_back(order_[i], states_[i]);
    return out;
  }

  /// Returns the number of intervals closed by this input.
  std::size_t feed(const std::string& id, std::int64_t timestamp, const StreamInput& input,
                   std::ostream& out) {
    DetectorState& s = state_for(id, floor_div(timestamp, bundle_.covariates.window_seconds));
    const auto before = s.interval_index;
    for (const auto& r : stream_step(s, model_, input)) write_score(out, id, r);
    return static_cast<std::size_t>(s.interval_index - before);
  }

  /// Closes the open interval of every metric at the end of the input.
  void finish(std::ostream& out) {
    if (bundle_.mode == DetectMode::asymptotic) return;
    for (std::size_t i = 0; i < order_.size(); ++i) {
      for (const auto& r : stream_step(states_[i], model_, EndOfWindow{})) write_score(out, order_[i], r);
    }
  }

  const ModelBundle& bundle() const { return bundle_; }

 private:
  DetectorState& state_for(const std::string& id, std::int64_t interval) {
    if (auto it = index_.find(id); it != index_.end()) return states_[it->second];
    index_[id] = order_.size();
    order_.push_back(id);
    states_.push_back(cold_start(model_, config_, interval, interval + static_cast<std::int64_t>(warmup_)));
    return states_.back();
  }

  const ModelBundle& bundle_;
  ScoringModel model_;
  DetectorConfig config_;
  std::uint64_t warmup_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> order_;
  std::vector<DetectorState> states_;
};

enum class LineFormat { unknown, metric_events, series };

struct ParsedLine {
  std::string id;
  std::int64_t timestamp;
  StreamInput input;
};

std::optional<ParsedLine> parse_stream_line(std::string_view line, std::size_t line_no, LineFormat& format,
                                            const std::string& default_id, const ModelBundle& m) {
  if (blank_or_comment(line)) return std::nullopt;
  auto fields = split_fields(line);
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  if (format == LineFormat::unknown) {
    format = fields.front() == "timestamp" ? LineFormat::series : LineFormat::metric_events;
    if (fields.front() == "timestamp" || fields.front() == "metric_id") return std::nullopt;
  }
  const bool asymptotic = m.mode == DetectMode::asymptotic;
  const std::size_t skip = format == LineFormat::series ? 0 : 1;
  if (fields.size() < skip + 2) throw ParseError("too few fields", line_no);
  ParsedLine p;
  p.id = format == LineFormat::series ? default_id : std::string(fields[0]);
  if (p.id.empty()) throw ParseError("empty metric id", line_no);
  try {
    p.timestamp = parse_timestamp(fields[skip]);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), line_no);
  }
  if (!asymptotic) {
    if (fields.size() != skip + 2) throw ParseError("expected a single value per line", line_no);
    p.input = Event{p.timestamp, parse_number(fields[skip + 1], line_no)};
    return p;
  }
  std::vector<double> q;
  for (std::size_t j = skip + 1; j < fields.size(); ++j) q.push_back(parse_number(fields[j], line_no));
  for (std::size_t j = 1; j < q.size(); ++j) {
    if (q[j] < q[j - 1]) throw ParseError("quantiles must be non-decreasing", line_no);
  }
  const auto interval = floor_div(p.timestamp, m.covariates.window_seconds);
  const auto cdf =
      PiecewiseLinearCdf::from_quantiles(m.grid, PiecewiseLinearCdf::standard_levels(q.size()), q);
  const auto obs = cdf_to_probs(cdf, m.grid, interval);
  p.input = Distribution{interval, {obs.probs().begin(), obs.probs().end()}};
  return p;
}

void detect_stream(const DetectOptions& o, const ModelBundle& m) {
  const DetectorConfig dc = detector_config(o, m);
  const std::uint64_t warmup = o.warmup.value_or(m.warmup_intervals);
  if (warmup == 0) throw UsageError("--warmup must be at least 1");
  if (o.checkpoint && o.out == "-") throw UsageError("checkpointing needs --out to name a file");
  if (o.resume && !o.checkpoint) throw UsageError("--resume needs --checkpoint");
  if (o.checkpoint_every == 0) throw UsageError("--checkpoint-every must be positive");

  StreamSession session(m, dc, warmup);
  std::uint64_t skip_lines = 0;
  bool fresh = true;
  if (o.resume && fs::exists(*o.checkpoint)) {
    StreamCheckpoint cp = load_checkpoint(*o.checkpoint);
    session.restore(std::move(cp.metrics));
    skip_lines = cp.lines_consumed;
    std::error_code ec;
    const auto size = fs::file_size(o.out, ec);
    if (ec || size < cp.output_bytes) throw StateCorrupt("score output is shorter than the checkpoint records");
    fs::resize_file(o.out, cp.output_bytes);
    fresh = false;
  }

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (o.out != "-") {
    file = open_output(o.out, fresh ? std::ios::out | std::ios::trunc : std::ios::out | std::ios::app);
    out = &file;
  }
  if (fresh) write_score_header(*out);

  std::ifstream in_file;
  std::istream* in = &std::cin;
  const std::string source = *o.stream;
  if (source != "-") {
    in_file.open(source);
    if (!in_file) throw Error("cannot open " + source);
    in = &in_file;
  }
  const std::string default_id = o.metric_id.empty() ? metric_name(source) : o.metric_id;

  auto write_checkpoint = [&](std::uint64_t lines) {
    out->flush();
    if (!*out) throw Error("cannot write " + o.out);
    StreamCheckpoint cp;
    cp.lines_consumed = lines;
    cp.output_bytes = static_cast<std::uint64_t>(file.tellp());
    cp.metrics = session.snapshot();
    save_checkpoint(cp, *o.checkpoint);
  };

  LineFormat format = LineFormat::unknown;
  std::string line;
  std::uint64_t line_no = 0;
  std::size_t closes = 0;
  while (std::getline(*in, line)) {
    ++line_no;
    const auto parsed = parse_stream_line(line, static_cast<std::size_t>(line_no), format, default_id, m);
    if (line_no <= skip_lines || !parsed) continue;
    closes += session.feed(parsed->id, parsed->timestamp, parsed->input, *out);
    if (o.checkpoint && closes >= o.checkpoint_every) {
      write_checkpoint(line_no);
      closes = 0;
    }
    if (o.limit_lines && line_no >= *o.limit_lines) {
      out->flush();
      return;
    }
  }
  session.finish(*out);
  out->flush();
  if (!*out) throw Error("cannot write " + o.out);
}

int cmd_detect(const DetectOptions& o) {
  if (o.data.empty() == !o.stream.has_value()) {
    throw UsageError("detect: give either --data (batch) or --stream");
  }
  const ModelBundle m = load_model(o.model);
  if (o.stream) {
    detect_stream(o, m);
    return 0;
  }
  if (o.out == "-") {
    detect_batch_files(o, m, std::cout);
  } else {
    auto file = open_output(o.out);
    detect_batch_files(o, m, file);
    file.flush();
    if (!file) throw Error("cannot write " + o.out);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string scores;
  std::string labels;
  std::optional<std::string> metric;
  std::string json;
};

struct IntervalScores {
  std::vector<double> point_log_p;
  std::vector<bool> point_flags;
  std::optional<double> window_log_p;
  std::optional<bool> window_flag;
  std::optional<double> combined_log_p;
};

int cmd_evaluate(const EvaluateOptions& o) {
  std::ifstream sf(o.scores);
  if (!sf) throw Error("cannot open " + o.scores);
  std::ifstream lf(o.labels);
  if (!lf) throw Error("cannot open " + o.labels);
  const auto scores = read_scores(sf);
  const auto label_rows = read_labels(lf);
  std::map<std::int64_t, bool> labels;
  for (const auto& [t, l] : label_rows) {
    if (!labels.emplace(t, l).second) {
      throw InvalidArgument("labels: interval " + std::to_string(t) + " listed twice");
    }
  }

  std::map<std::pair<std::string, std::int64_t>, IntervalScores> by_interval;
  for (const auto& s : scores) {
    if (o.metric && s.metric_id != *o.metric) continue;
    auto& iv = by_interval[{s.metric_id, s.record.interval_index}];
    switch (s.record.stage) {
      case Stage::point:
        iv.point_log_p.push_back(s.record.log_p);
        iv.point_flags.push_back(s.record.flagged);
        break;
      case Stage::window:
        iv.window_log_p = s.record.log_p;
        iv.window_flag = s.record.flagged;
        break;
      case Stage::combined:
        iv.combined_log_p = s.record.log_p;
        break;
      case Stage::subwindow:
        break;
    }
  }
  if (by_interval.empty()) throw InvalidArgument("evaluate: no scores to evaluate");

  std::vector<bool> flags, interval_labels, score_labels;
  std::vector<double> auc_scores;
  for (const auto& [key, iv] : by_interval) {
    const auto it = labels.find(key.second);
    if (it == labels.end()) {
      throw InvalidArgument("evaluate: no label for interval " + std::to_string(key.second) +
                            " of metric " + key.first);
    }
    const bool label = it->second;
    bool flag = false;
    if (iv.window_flag) {
      flag = *iv.window_flag;
    } else {
      flag = std::find(iv.point_flags.begin(), iv.point_flags.end(), true) != iv.point_flags.end();
    }
    flags.push_back(flag);
    interval_labels.push_back(label);
    if (!iv.point_log_p.empty()) {
      for (double lp : iv.point_log_p) {
        auc_scores.push_back(-(lp + iv.window_log_p.value_or(0.0)));
        score_labels.push_back(label);
      }
    } else if (iv.combined_log_p || iv.window_log_p) {
      auc_scores.push_back(-iv.combined_log_p.value_or(*iv.window_log_p));
      score_labels.push_back(label);
    }
  }

  const RateReport rates = fpr_recall(flags, interval_labels);
  std::optional<double> auc;
  try {
    auc = roc_auc(auc_scores, score_labels);
  } catch (const UndefinedMetric&) {
  }
  std::cout << "intervals " << flags.size() << '\n';
  std::cout << "fpr " << rates.fpr << '\n';
  std::cout << "recall " << (rates.recall ? std::to_string(*rates.recall) : "n/a") << '\n';
  std::cout << "auc " << (auc ? std::to_string(*auc) : "n/a") << '\n';
  if (!o.json.empty()) {
    nlohmann::json j;
    j["intervals"] = flags.size();
    j["fpr"] = rates.fpr;
    j["recall"] = rates.recall ? nlohmann::json(*rates.recall) : nlohmann::json(nullptr);
    j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
    write_text(o.json, j.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentOptions {
  std::vector<std::string> scenarios;
  std::size_t runs = 10;
  std::uint64_t first_seed = 0;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> projection_lr_scale;
  std::size_t samples = 1000;
  double epsilon = 0.05;
  std::string json;
  bool quiet = false;
};

void apply_training(TrainingConfig& tc, const ExperimentOptions& o) {
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.lr) tc.learning_rate = *o.lr;
  if (o.projection_lr_scale) tc.projection_lr_scale = *o.projection_lr_scale;
}

int cmd_experiment(const ExperimentOptions& o) {
  if (o.runs == 0) throw UsageError("--runs must be positive");
  ExperimentConfig config;
  bool point = false;
  std::vector<std::string> names = o.scenarios;
  if (names.empty()) {
    for (auto regime : {ObservationRegime::asymptotic, ObservationRegime::finite}) {
      for (const auto& s : standard_scenarios(regime)) names.push_back(s.name());
    }
  }
  for (const auto& name : names) {
    if (name == "single") {
      point = true;
      continue;
    }
    try {
      config.scenarios.push_back(Scenario::parse(name));
    } catch (const InvalidArgument&) {
      throw UsageError("unknown scenario '" + name + "'");
    }
  }
  config.runs = o.runs;
  config.first_seed = o.first_seed;
  config.mc_samples = o.samples;
  config.epsilon = o.epsilon;
  apply_training(config.training, o);

  nlohmann::json j = nlohmann::json::object();
  if (!config.scenarios.empty()) {
    ExperimentRunner runner(config);
    if (!o.quiet) {
      runner.on_progress([](const Scenario& s, const RunResult& r) {
        std::cerr << s.name() << " seed " << r.seed << " fpr " << r.rates.fpr << '\n';
      });
    }
    const auto reports = runner.run_all();
    std::cout << format_reports(reports);
    j["scenarios"] = nlohmann::json::parse(reports_to_json(reports));
  }
  if (point) {
    PointExperimentConfig pc;
    pc.runs = o.runs;
    pc.first_seed = o.first_seed;
    apply_training(pc.training, o);
    const auto results = run_point_experiment(pc);
    std::vector<double> aucs;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : results) {
      aucs.push_back(r.auc);
      runs.push_back({{"seed", r.seed}, {"auc", r.auc}, {"fpr", r.rates.fpr}});
    }
    const MeanStd auc = summarize(aucs);
    std::cout << "single  auc " << auc.mean << " +- " << auc.std << " over " << auc.count << " runs\n";
    j["single"] = {{"auc_mean", auc.mean}, {"auc_std", auc.std}, {"runs", runs}};
  }
  if (!o.json.empty()) write_text(o.json, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Anomaly detection on time series of distributions"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON configuration file; command-line options override it");
  app.require_subcommand(1);
  app.fallthrough();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic series and its labels");
  simulate->add_option("--scenario", sim.scenario,
                       "asymp-ds1[-mu|-sigma], asymp-ds2..., finite-ds1..., finite-ds2..., single")
      ->required();
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--out-dir", sim.out_dir, "Directory for series.csv and labels.csv");
  simulate->add_option("--learn", sim.learn, "Learning-range intervals");
  simulate->add_option("--detect", sim.detect, "Detection-range intervals");
  simulate->add_option("--noise", sim.noise, "Noise standard deviation");
  simulate->add_option("--samples-per-interval", sim.samples_per_interval, "Samples per interval (finite)");
  simulate->add_option("--quantiles", sim.quantiles, "Quantiles per interval (asymptotic)");
  simulate->add_option("--period", sim.period, "Seasonal period in intervals");
  simulate->add_option("--window", sim.window, "Interval length in seconds");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Fit a model on one or more series");
  train_cmd->add_option("--data", tr.data, "Series files (one metric each)")->required();
  train_cmd->add_option("--out", tr.out, "Model file to write")->required();
  train_cmd->add_option("--mode", tr.mode, "auto | asymptotic | finite | single")
      ->check(CLI::IsMember({"auto", "asymptotic", "finite", "single"}));
  train_cmd->add_option("--grid", tr.grid, "auto | regular | quantile")
      ->check(CLI::IsMember({"auto", "regular", "quantile"}));
  train_cmd->add_option("--bins", tr.bins, "Number of bins (0 picks the mode default)");
  train_cmd->add_option("--support-min", tr.support_min, "Lower support bound");
  train_cmd->add_option("--support-max", tr.support_max, "Upper support bound");
  train_cmd->add_option("--margin", tr.margin, "Support margin as a fraction of the range");
  train_cmd->add_option("--train-fraction", tr.train_fraction, "Leading fraction of each series used");
  train_cmd->add_option("--learn-intervals", tr.learn_intervals, "Leading intervals used (overrides the fraction)");
  train_cmd->add_option("--window", tr.window, "Interval length in seconds");
  train_cmd->add_option("--epochs", tr.epochs, "Training epochs");
  train_cmd->add_option("--lr", tr.lr, "Learning rate");
  train_cmd->add_option("--projection-lr-scale", tr.projection_lr_scale, "Projection learning-rate multiplier");
  train_cmd->add_option("--clip", tr.clip, "Gradient-norm clip");
  train_cmd->add_option("--batch", tr.batch, "Series per batch");
  train_cmd->add_option("--context", tr.context, "Truncated BPTT length");
  train_cmd->add_option("--hidden", tr.hidden, "LSTM units per layer");
  train_cmd->add_option("--layers", tr.layers, "LSTM layers");
  train_cmd->add_option("--seed", tr.seed, "Random seed");
  train_cmd->add_flag("--verbose", tr.verbose, "Print the loss of every epoch");

  DetectOptions de;
  auto* detect_cmd = app.add_subcommand("detect", "Score series in batch or from a stream");
  detect_cmd->add_option("--model", de.model, "Model file")->required();
  detect_cmd->add_option("--data", de.data, "Series files to score in batch");
  detect_cmd->add_option("--stream", de.stream, "Line stream to score ('-' for stdin)");
  detect_cmd->add_option("--metric-id", de.metric_id, "Metric id for a single-series stream");
  detect_cmd->add_option("--out", de.out, "Score file ('-' for stdout)");
  detect_cmd->add_option("--epsilon", de.epsilon, "Level-set tail probability");
  detect_cmd->add_option("--samples", de.samples, "Monte Carlo samples per window");
  detect_cmd->add_option("--seed", de.seed, "Monte Carlo seed");
  detect_cmd->add_option("--subwindow", de.subwindow, "Events per intermediate score (0 disables)");
  detect_cmd->add_option("--warmup", de.warmup, "Leading intervals that are not scored");
  detect_cmd->add_option("--checkpoint", de.checkpoint, "Stream checkpoint file");
  detect_cmd->add_option("--checkpoint-every", de.checkpoint_every, "Interval closes between checkpoints");
  detect_cmd->add_flag("--resume", de.resume, "Continue from the checkpoint");
  detect_cmd->add_option("--limit-lines", de.limit_lines, "Stop after this many input lines without closing open intervals");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "FPR, recall and AUC of scores against labels");
  evaluate->add_option("--scores", ev.scores, "Score file")->required();
  evaluate->add_option("--labels", ev.labels, "Labels file")->required();
  evaluate->add_option("--metric", ev.metric, "Only this metric");
  evaluate->add_option("--json", ev.json, "Also write the report as JSON");

  ExperimentOptions ex;
  auto* experiment = app.add_subcommand("experiment", "Synthetic benchmark over several seeds");
  experiment->add_option("--scenario", ex.scenarios, "Scenarios to run (default: all, 'single' for the point pathway)");
  experiment->add_option("--runs", ex.runs, "Seeds per scenario");
  experiment->add_option("--first-seed", ex.first_seed, "First seed");
  experiment->add_option("--epochs", ex.epochs, "Training epochs");
  experiment->add_option("--lr", ex.lr, "Learning rate");
  experiment->add_option("--projection-lr-scale", ex.projection_lr_scale, "Projection learning-rate multiplier");
  experiment->add_option("--samples", ex.samples, "Monte Carlo samples per window");
  experiment->add_option("--epsilon", ex.epsilon, "Level-set tail probability");
  experiment->add_option("--json", ex.json, "Write the reports as JSON");
  experiment->add_flag("--quiet", ex.quiet, "No per-run progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (detect_cmd->parsed()) return cmd_detect(de);
    if (evaluate->parsed()) return cmd_evaluate(ev);
    if (experiment->parsed()) return cmd_experiment(ex);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace distad::cli

int main(int argc, char** argv) { return distad::cli::run(argc, argv); }
