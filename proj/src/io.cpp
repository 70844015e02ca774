// SPDX-License-Identifier: Apache-2.0
#include "distad/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bytes.hpp"
#include "distad/error.hpp"

namespace distad {

namespace {

constexpr char kModelMagic[4] = {'D', 'A', 'D', 'M'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kMaxModelVector = std::size_t{1} << 28;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("invalid number '" + std::string(s) + "'", line);
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("invalid integer '" + std::string(s) + "'", line);
  }
  return v;
}

bool skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

int digits(std::string_view s, std::size_t pos, std::size_t n) {
  if (pos + n > s.size()) throw InvalidArgument("timestamp too short");
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') throw InvalidArgument("timestamp has a non-digit");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

std::string to_string(DetectMode mode) {
  switch (mode) {
    case DetectMode::asymptotic:
      return "asymptotic";
    case DetectMode::finite:
      return "finite";
    case DetectMode::single:
      return "single";
  }
  return "unknown";
}

DetectMode parse_mode(const std::string& name) {
  if (name == "asymptotic") return DetectMode::asymptotic;
  if (name == "finite") return DetectMode::finite;
  if (name == "single") return DetectMode::single;
  throw InvalidArgument("unknown mode '" + name + "'");
}

std::int64_t parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw InvalidArgument("empty timestamp");
  if (text.find('-', 1) == std::string_view::npos && text.find('T') == std::string_view::npos) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw InvalidArgument("invalid timestamp '" + std::string(text) + "'");
    }
    return v;
  }
  // YYYY-MM-DDTHH:MM:SS[.fff](Z|+hh:mm|-hh:mm)
  using namespace std::chrono;
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw InvalidArgument("invalid RFC 3339 timestamp '" + std::string(text) + "'");
  }
  const year_month_day ymd{year{digits(text, 0, 4)}, month{static_cast<unsigned>(digits(text, 5, 2))},
                           day{static_cast<unsigned>(digits(text, 8, 2))}};
  if (!ymd.ok()) throw InvalidArgument("invalid calendar date '" + std::string(text) + "'");
  const int hh = digits(text, 11, 2), mm = digits(text, 14, 2), ss = digits(text, 17, 2);
  if (hh > 23 || mm > 59 || ss > 60) throw InvalidArgument("invalid time of day");
  std::size_t pos = 19;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
  }
  std::int64_t offset = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '+' ? 1 : -1;
    if (pos + 6 > text.size() || text[pos + 3] != ':') throw InvalidArgument("invalid UTC offset");
    offset = sign * (digits(text, pos + 1, 2) * 3600 + digits(text, pos + 4, 2) * 60);
    pos += 6;
  } else {
    throw InvalidArgument("RFC 3339 timestamp needs a UTC offset");
  }
  if (pos != text.size()) throw InvalidArgument("trailing characters in timestamp");
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss - offset;
}

// ---------------------------------------------------------------------------
// Model files

std::vector<std::uint8_t> serialize_model(const ModelBundle& m) {
  detail::ByteWriter w;
  w.put_raw(kModelMagic, sizeof kModelMagic);
  w.put(kModelVersion);
  w.put_doubles(m.grid.knots());
  const auto& dims = m.params.dims();
  w.put<std::uint64_t>(dims.bins);
  w.put<std::uint64_t>(dims.covariates);
  w.put<std::uint64_t>(dims.hidden);
  w.put<std::uint64_t>(dims.layers);
  w.put_doubles(m.params.values());
  const auto& c = m.covariates;
  w.put(c.window_seconds);
  w.put<std::uint8_t>(c.hour_of_day);
  w.put<std::uint8_t>(c.day_of_week);
  w.put<std::uint8_t>(c.age);
  w.put(c.age_origin);
  w.put(c.age_scale);
  const auto& t = m.training;
  w.put<std::int32_t>(t.epochs);
  w.put(t.learning_rate);
  w.put(t.projection_lr_scale);
  w.put(t.clip_norm);
  w.put<std::uint64_t>(t.batch_size);
  w.put<std::uint64_t>(t.context_length);
  w.put<std::uint64_t>(t.hidden);
  w.put<std::uint64_t>(t.layers);
  w.put(t.seed);
  w.put<std::uint8_t>(t.init_bias_from_data);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.mode));
  w.put(m.train_fraction);
  w.put(m.warmup_intervals);
  w.put(m.final_nll);
  auto& bytes = w.bytes();
  const std::uint32_t crc = detail::crc32(bytes);
  w.put(crc);
  return std::move(bytes);
}

ModelBundle deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw StateCorrupt("model file: truncated");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (detail::crc32(bytes.first(bytes.size() - 4)) != stored) {
    throw StateCorrupt("model file: checksum mismatch");
  }
  detail::ByteReader r(bytes.first(bytes.size() - 4), "model file");
  r.expect_raw(kModelMagic, sizeof kModelMagic);
  if (r.get<std::uint32_t>() != kModelVersion) throw StateCorrupt("model file: unsupported version");
  try {
    BinGrid grid(r.get_doubles(kMaxModelVector));
    ModelDims dims;
    dims.bins = static_cast<std::size_t>(r.get<std::uint64_t>());
    dims.covariates = static_cast<std::size_t>(r.get<std::uint64_t>());
    dims.hidden = static_cast<std::size_t>(r.get<std::uint64_t>());
    dims.layers = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (dims.bins != grid.bin_count() || dims.hidden > 4096 || dims.layers > 64 ||
        dims.covariates > 4096) {
      throw StateCorrupt("model file: inconsistent dimensions");
    }
    ModelParams params(dims);
    const auto values = r.get_doubles(kMaxModelVector);
    if (values.size() != params.size()) throw StateCorrupt("model file: wrong parameter count");
    std::copy(values.begin(), values.end(), params.values().begin());
    if (!params.all_finite()) throw StateCorrupt("model file: non-finite parameters");
    CovariateSpec c;
    c.window_seconds = r.get<std::int64_t>();
    c.hour_of_day = r.get<std::uint8_t>() != 0;
    c.day_of_week = r.get<std::uint8_t>() != 0;
    c.age = r.get<std::uint8_t>() != 0;
    c.age_origin = r.get<double>();
    c.age_scale = r.get<double>();
    if (c.width() != dims.covariates) throw StateCorrupt("model file: covariate width mismatch");
    TrainingConfig t;
    t.epochs = r.get<std::int32_t>();
    t.learning_rate = r.get<double>();
    t.projection_lr_scale = r.get<double>();
    t.clip_norm = r.get<double>();
    t.batch_size = static_cast<std::size_t>(r.get<std::uint64_t>());
    t.context_length = static_cast<std::size_t>(r.get<std::uint64_t>());
    t.hidden = static_cast<std::size_t>(r.get<std::uint64_t>());
    t.layers = static_cast<std::size_t>(r.get<std::uint64_t>());
    t.seed = r.get<std::uint64_t>();
    t.init_bias_from_data = r.get<std::uint8_t>() != 0;
    const auto mode = r.get<std::uint8_t>();
    if (mode > static_cast<std::uint8_t>(DetectMode::single)) throw StateCorrupt("model file: unknown mode");
    ModelBundle m{std::move(grid), std::move(params), c, t, static_cast<DetectMode>(mode)};
    m.train_fraction = r.get<double>();
    m.warmup_intervals = r.get<std::uint64_t>();
    m.final_nll = r.get<double>();
    if (r.remaining() != 0) throw StateCorrupt("model file: trailing bytes");
    return m;
  } catch (const InvalidArgument& e) {
    throw StateCorrupt(std::string("model file: ") + e.what());
  }
}

void save_model(const ModelBundle& model, const std::string& path) {
  detail::write_file_atomic(path, serialize_model(model));
}

ModelBundle load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Stream checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'A', 'D', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::size_t kMaxMetricId = 4096;
constexpr std::size_t kMaxStateBytes = std::size_t{1} << 26;

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const StreamCheckpoint& cp) {
  detail::ByteWriter w;
  w.put_raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.put(kCheckpointVersion);
  w.put(cp.lines_consumed);
  w.put(cp.output_bytes);
  w.put<std::uint64_t>(cp.metrics.size());
  for (const auto& [id, state] : cp.metrics) {
    w.put_string(id);
    const auto bytes = serialize_state(state);
    w.put<std::uint64_t>(bytes.size());
    w.bytes().insert(w.bytes().end(), bytes.begin(), bytes.end());
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = detail::crc32(bytes);
  w.put(crc);
  return std::move(bytes);
}

StreamCheckpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw StateCorrupt("checkpoint: truncated");
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  const auto body = bytes.first(bytes.size() - 4);
  if (detail::crc32(body) != stored) throw StateCorrupt("checkpoint: checksum mismatch");
  detail::ByteReader r(body, "checkpoint");
  r.expect_raw(kCheckpointMagic, sizeof kCheckpointMagic);
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw StateCorrupt("checkpoint: unsupported version");
  StreamCheckpoint cp;
  cp.lines_consumed = r.get<std::uint64_t>();
  cp.output_bytes = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining()) throw StateCorrupt("checkpoint: implausible metric count");
  for (std::uint64_t i = 0; i < count; ++i) {
    auto id = r.get_string(kMaxMetricId);
    const auto n = r.get<std::uint64_t>();
    if (n > kMaxStateBytes || n > r.remaining()) throw StateCorrupt("checkpoint: implausible state size");
    const auto offset = body.size() - r.remaining();
    auto state = deserialize_state(body.subspan(offset, static_cast<std::size_t>(n)));
    r.skip(static_cast<std::size_t>(n));
    cp.metrics.emplace_back(std::move(id), std::move(state));
  }
  if (r.remaining() != 0) throw StateCorrupt("checkpoint: trailing bytes");
  return cp;
}

void save_checkpoint(const StreamCheckpoint& checkpoint, const std::string& path) {
  detail::write_file_atomic(path, serialize_checkpoint(checkpoint));
}

StreamCheckpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// CSV

SeriesData read_series(std::istream& in, const std::string& source) {
  SeriesData data;
  std::string line;
  std::size_t line_number = 0;
  std::size_t columns = 0;
  bool samples = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (skippable(line)) continue;
    const auto fields = split(line);
    if (columns == 0) {
      if (fields.size() < 2 || fields[0] != "timestamp") {
        throw ParseError(source + ": expected a header starting with 'timestamp'", line_number);
      }
      columns = fields.size();
      samples = columns == 2 && fields[1] == "value";
      if (!samples) {
        for (std::size_t j = 1; j < fields.size(); ++j) {
          if (fields[j] != "q" + std::to_string(j)) {
            throw ParseError(source + ": quantile columns must be named q1..qK", line_number);
          }
        }
      }
      continue;
    }
    std::int64_t ts = 0;
    try {
      ts = parse_timestamp(fields[0]);
    } catch (const InvalidArgument& e) {
      throw ParseError(source + ": " + e.what(), line_number);
    }
    if (samples) {
      if (fields.size() != 2) throw ParseError(source + ": expected 2 fields", line_number);
      data.events.push_back({ts, parse_double(fields[1], line_number)});
    } else {
      const std::size_t k = columns;
      if (fields.size() != k) throw ParseError(source + ": wrong number of quantile fields", line_number);
      std::vector<double> q;
      q.reserve(k - 1);
      for (std::size_t j = 1; j < k; ++j) q.push_back(parse_double(fields[j], line_number));
      for (std::size_t j = 1; j < q.size(); ++j) {
        if (q[j] < q[j - 1]) throw ParseError(source + ": quantiles must be non-decreasing", line_number);
      }
      data.timestamps.push_back(ts);
      data.quantiles.push_back(std::move(q));
    }
  }
  if (columns == 0) throw ParseError(source + ": missing header", line_number);
  return data;
}

SeriesData read_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_series(in, path);
}

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

void write_sample_series(std::ostream& out, std::span<const Event> events) {
  out << "timestamp,value\n";
  for (const auto& e : events) {
    out << e.timestamp << ',';
    put_double(out, e.value);
    out << '\n';
  }
}

void write_quantile_series(std::ostream& out, std::span<const std::int64_t> timestamps,
                           const std::vector<std::vector<double>>& quantiles) {
  if (timestamps.size() != quantiles.size()) throw InvalidArgument("write_quantile_series: length mismatch");
  if (quantiles.empty()) throw InvalidArgument("write_quantile_series: no rows");
  out << "timestamp";
  for (std::size_t j = 1; j <= quantiles.front().size(); ++j) out << ",q" << j;
  out << '\n';
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    out << timestamps[i];
    for (double q : quantiles[i]) {
      out << ',';
      put_double(out, q);
    }
    out << '\n';
  }
}

std::optional<MetricEvent> parse_event_line(std::string_view line, std::size_t line_number) {
  if (skippable(line)) return std::nullopt;
  const auto fields = split(line);
  if (fields.size() != 3) throw ParseError("event lines need metric_id,timestamp,value", line_number);
  if (fields[0] == "metric_id") return std::nullopt;
  if (fields[0].empty()) throw ParseError("empty metric id", line_number);
  std::int64_t ts = 0;
  try {
    ts = parse_timestamp(fields[1]);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what(), line_number);
  }
  return MetricEvent{std::string(fields[0]), {ts, parse_double(fields[2], line_number)}};
}

std::vector<std::pair<std::int64_t, bool>> read_labels(std::istream& in) {
  std::vector<std::pair<std::int64_t, bool>> out;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++n;
    if (skippable(line)) continue;
    const auto f = split(line);
    if (f.size() != 2) throw ParseError("labels need interval_index,label", n);
    if (!header && f[0] == "interval_index") {
      header = true;
      continue;
    }
    header = true;
    bool label;
    if (f[1] == "1" || f[1] == "malfunction") {
      label = true;
    } else if (f[1] == "0" || f[1] == "normal") {
      label = false;
    } else {
      throw ParseError("unknown label '" + std::string(f[1]) + "'", n);
    }
    out.emplace_back(parse_int(f[0], n), label);
  }
  return out;
}

void write_labels(std::ostream& out, std::span<const std::pair<std::int64_t, bool>> labels) {
  out << "interval_index,label\n";
  for (const auto& [t, l] : labels) out << t << ',' << (l ? 1 : 0) << '\n';
}

void write_score_header(std::ostream& out) {
  out << "metric_id,interval_index,stage,log_p,flagged\n";
}

void write_score(std::ostream& out, const std::string& metric_id, const ScoreRecord& r) {
  out << metric_id << ',' << r.interval_index << ',' << to_string(r.stage) << ',';
  put_double(out, r.log_p);
  out << ',' << (r.flagged ? 1 : 0) << '\n';
}

std::vector<MetricScore> read_scores(std::istream& in) {
  std::vector<MetricScore> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (skippable(line)) continue;
    const auto f = split(line);
    if (f.size() != 5) throw ParseError("score lines need 5 fields", n);
    if (f[0] == "metric_id") continue;
    ScoreRecord r{};
    r.interval_index = parse_int(f[1], n);
    try {
      r.stage = parse_stage(std::string(f[2]));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), n);
    }
    r.log_p = parse_double(f[3], n);
    if (f[4] != "0" && f[4] != "1") throw ParseError("flagged must be 0 or 1", n);
    r.flagged = f[4] == "1";
    out.push_back({std::string(f[0]), r});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

std::vector<IntervalData> intervals_from_events(std::span<const Event> events,
                                                std::int64_t window_seconds) {
  const auto windows = aggregate_events(events, window_seconds);
  std::vector<IntervalData> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back({w.interval_index, w.samples, {}});
  return out;
}

std::vector<IntervalData> intervals_from_quantiles(const SeriesData& data, const BinGrid& grid,
                                                   std::int64_t window_seconds) {
  if (window_seconds <= 0) throw InvalidArgument("window must be positive");
  std::vector<IntervalData> out;
  if (data.quantiles.empty()) return out;
  const auto levels = PiecewiseLinearCdf::standard_levels(data.quantiles.front().size());
  for (std::size_t i = 0; i < data.quantiles.size(); ++i) {
    if (data.quantiles[i].size() != levels.size()) throw InvalidArgument("quantile rows differ in width");
    const std::int64_t index = floor_div(data.timestamps[i], window_seconds);
    if (!out.empty() && index <= out.back().interval_index) {
      throw InvalidArgument("quantile rows must have strictly increasing intervals");
    }
    while (!out.empty() && out.back().interval_index + 1 < index) {
      out.push_back({out.back().interval_index + 1, {}, {}});
    }
    const auto cdf = PiecewiseLinearCdf::from_quantiles(grid, levels, data.quantiles[i]);
    const auto obs = cdf_to_probs(cdf, grid, index);
    out.push_back({index, {}, {obs.probs().begin(), obs.probs().end()}});
  }
  return out;
}

std::vector<BinnedObservation> observations_from_intervals(std::span<const IntervalData> intervals,
                                                           const BinGrid& grid, bool asymptotic) {
  std::vector<BinnedObservation> out;
  out.reserve(intervals.size());
  for (const auto& iv : intervals) {
    if (asymptotic) {
      out.push_back(iv.probs.empty() ? BinnedObservation::missing(grid.bin_count(), iv.interval_index)
                                     : BinnedObservation::asymptotic(iv.probs, iv.interval_index));
    } else {
      out.push_back(iv.values.empty() ? BinnedObservation::missing(grid.bin_count(), iv.interval_index)
                                      : bin_samples(iv.values, grid, iv.interval_index));
    }
  }
  return out;
}

}  // namespace distad
