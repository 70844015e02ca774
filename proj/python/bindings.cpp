// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "distad/detect.hpp"
#include "distad/dist.hpp"
#include "distad/error.hpp"
#include "distad/eval.hpp"
#include "distad/grid.hpp"
#include "distad/io.hpp"
#include "distad/synth.hpp"

namespace py = pybind11;
using namespace distad;

namespace {

py::dict score_dict(const AnomalyScore& s) {
  py::dict d;
  d["log_p_point"] = s.log_p_point ? py::cast(*s.log_p_point) : py::none();
  d["log_p_window"] = s.log_p_window ? py::cast(*s.log_p_window) : py::none();
  d["combined"] = s.combined;
  d["is_anomaly"] = s.is_anomaly;
  return d;
}

py::dict record_dict(const ScoreRecord& r) {
  py::dict d;
  d["interval_index"] = r.interval_index;
  d["stage"] = to_string(r.stage);
  d["log_p"] = r.log_p;
  d["flagged"] = r.flagged;
  return d;
}

py::list record_list(const std::vector<ScoreRecord>& records) {
  py::list out;
  for (const auto& r : records) out.append(record_dict(r));
  return out;
}

py::dict rates_dict(const RateReport& r) {
  py::dict d;
  d["fpr"] = r.fpr;
  d["recall"] = r.recall ? py::cast(*r.recall) : py::none();
  return d;
}

/// Streaming detector for one metric.
class Detector {
 public:
  Detector(const ModelBundle& bundle, double epsilon, std::size_t samples, std::uint64_t seed,
           std::uint32_t subwindow, std::int64_t first_interval, std::optional<std::int64_t> warmup)
      : model_(bundle.scoring()) {
    DetectorConfig c;
    c.mode = bundle.mode;
    c.epsilon = epsilon;
    c.samples = samples;
    c.seed = seed;
    c.subwindow = subwindow;
    const std::int64_t w = warmup.value_or(static_cast<std::int64_t>(bundle.warmup_intervals));
    state_ = cold_start(model_, c, first_interval, first_interval + w);
  }

  py::list event(std::int64_t timestamp, double value) { return step(Event{timestamp, value}); }
  py::list end_window() { return step(EndOfWindow{}); }
  py::list distribution(std::int64_t interval_index, std::vector<double> probs) {
    return step(Distribution{interval_index, std::move(probs)});
  }

  py::bytes state() const {
    const auto b = serialize_state(state_);
    return {reinterpret_cast<const char*>(b.data()), b.size()};
  }

  void restore(const py::bytes& data) {
    const std::string s = data;
    state_ = deserialize_state(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  std::int64_t interval_index() const { return state_.interval_index; }
  std::vector<double> alpha() const { return state_.alpha; }

 private:
  py::list step(const StreamInput& input) { return record_list(stream_step(state_, model_, input)); }

  ScoringModel model_;
  DetectorState state_;
};

py::list detect_events(const ModelBundle& bundle, const std::vector<std::int64_t>& timestamps,
                       const std::vector<double>& values, double epsilon, std::size_t samples, std::uint64_t seed,
                       std::uint32_t subwindow, std::optional<std::size_t> warmup) {
  if (timestamps.size() != values.size()) throw InvalidArgument("timestamps and values differ in length");
  if (bundle.mode == DetectMode::asymptotic) throw InvalidArgument("asymptotic models score through Detector.distribution");
  std::vector<Event> events(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) events[i] = {timestamps[i], values[i]};
  const auto intervals = intervals_from_events(events, bundle.covariates.window_seconds);
  const std::size_t w = warmup.value_or(bundle.warmup_intervals);
  if (w == 0 || intervals.size() <= w) throw InvalidArgument("series does not extend past the warm-up");
  DetectorConfig c;
  c.mode = bundle.mode;
  c.epsilon = epsilon;
  c.samples = samples;
  c.seed = seed;
  c.subwindow = subwindow;
  const ScoringModel model = bundle.scoring();
  const auto history = observations_from_intervals(std::span(intervals).first(w), bundle.grid, false);
  const DetectorState start = warm_start(model, c, history, intervals.front().interval_index);
  return record_list(detect_batch(start, model, std::span(intervals).subspan(w)));
}

}  // namespace

PYBIND11_MODULE(_distad, m) {
  m.doc() = "Anomaly detection on time series of distributions";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<StateCorrupt>(m, "StateCorrupt", PyExc_RuntimeError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", PyExc_ValueError);

  py::class_<BinGrid>(m, "BinGrid")
      .def(py::init<std::vector<double>>(), py::arg("knots"))
      .def_property_readonly("knots", [](const BinGrid& g) { return std::vector<double>(g.knots().begin(), g.knots().end()); })
      .def_property_readonly("bin_count", &BinGrid::bin_count)
      .def("bin_index", &BinGrid::bin_index, py::arg("value"))
      .def("__len__", &BinGrid::bin_count);

  m.def("make_regular_grid", &make_regular_grid, py::arg("y_min"), py::arg("y_max"), py::arg("bins"));
  m.def(
      "make_quantile_grid",
      [](const std::vector<double>& values, std::size_t bins, std::optional<double> lo, std::optional<double> hi,
         double margin) {
        Support s = default_support(values, margin);
        if (lo) s.y_min = *lo;
        if (hi) s.y_max = *hi;
        return make_quantile_grid(values, bins, s);
      },
      py::arg("values"), py::arg("bins"), py::arg("support_min") = py::none(), py::arg("support_max") = py::none(),
      py::arg("margin") = 0.05);
  m.def(
      "bin_counts",
      [](const std::vector<double>& samples, const BinGrid& grid) {
        const auto o = bin_samples(samples, grid);
        return std::vector<std::uint32_t>(o.counts().begin(), o.counts().end());
      },
      py::arg("samples"), py::arg("grid"));

  m.def(
      "dirichlet_logpdf",
      [](const std::vector<double>& p, const std::vector<double>& alpha) {
        return dirichlet_logpdf(p, ConcentrationVector(alpha)).value;
      },
      py::arg("p"), py::arg("alpha"));
  m.def(
      "dirmult_logpmf",
      [](const std::vector<std::uint32_t>& counts, const std::vector<double>& alpha) {
        std::uint64_t n = 0;
        for (auto c : counts) n += c;
        return dirmult_logpmf(counts, n, ConcentrationVector(alpha)).value;
      },
      py::arg("counts"), py::arg("alpha"));
  m.def(
      "point_score",
      [](const std::vector<double>& alpha, std::size_t bin, double epsilon) {
        return score_dict(point_score(ConcentrationVector(alpha), bin, epsilon));
      },
      py::arg("alpha"), py::arg("bin"), py::arg("epsilon") = 0.05);
  m.def(
      "window_score",
      [](const std::vector<double>& alpha, const std::vector<std::uint32_t>& counts, double epsilon,
         std::size_t samples, std::uint64_t seed) {
        std::uint64_t n = 0;
        for (auto c : counts) n += c;
        Rng rng(seed);
        return score_dict(window_score(ConcentrationVector(alpha), counts, n, epsilon, samples, rng));
      },
      py::arg("alpha"), py::arg("counts"), py::arg("epsilon") = 0.05, py::arg("samples") = 1000,
      py::arg("seed") = 0);
  m.def(
      "exact_log_eta",
      [](const std::vector<double>& logliks, const std::vector<double>& probs, double epsilon) {
        if (logliks.size() != probs.size()) throw InvalidArgument("logliks and probs differ in length");
        std::vector<Outcome> o(logliks.size());
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = {logliks[i], probs[i]};
        return exact_eta(o, epsilon).log_eta;
      },
      py::arg("logliks"), py::arg("probs"), py::arg("epsilon") = 0.05);

  m.def(
      "simulate",
      [](const std::string& dynamics, const std::string& malfunction, std::optional<std::uint32_t> samples,
         std::size_t learn, std::size_t detect, std::size_t quantiles, std::uint64_t seed) {
        SynthConfig c;
        const Scenario s = Scenario::parse("asymp-" + dynamics + (malfunction == "none" ? "" : "-" + malfunction));
        c.dynamics = s.dynamics;
        c.malfunction = s.malfunction;
        c.samples_per_interval = samples;
        c.learn_length = learn;
        c.detect_length = detect;
        c.quantile_count = quantiles;
        c.seed = seed;
        const auto series = generate(c);
        py::dict d;
        d["samples"] = series.samples;
        d["quantiles"] = series.quantiles;
        d["malfunction"] = series.malfunction;
        d["learn_length"] = series.learn_length;
        return d;
      },
      py::arg("dynamics") = "ds1", py::arg("malfunction") = "none", py::arg("samples_per_interval") = py::none(),
      py::arg("learn") = 1500, py::arg("detect") = 2000, py::arg("quantiles") = 1000, py::arg("seed") = 0);

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<bool>& labels) { return roc_auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "fpr_recall",
      [](const std::vector<bool>& flags, const std::vector<bool>& labels) {
        return rates_dict(fpr_recall(flags, labels));
      },
      py::arg("flags"), py::arg("labels"));

  py::class_<ModelBundle>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const ModelBundle& b, const std::string& path) { save_model(b, path); }, py::arg("path"))
      .def_property_readonly("grid", [](const ModelBundle& b) { return b.grid; })
      .def_property_readonly("mode", [](const ModelBundle& b) { return to_string(b.mode); })
      .def_property_readonly("window_seconds", [](const ModelBundle& b) { return b.covariates.window_seconds; })
      .def_property_readonly("warmup_intervals", [](const ModelBundle& b) { return b.warmup_intervals; })
      .def_property_readonly("final_nll", [](const ModelBundle& b) { return b.final_nll; });

  m.def("detect_events", &detect_events, py::arg("model"), py::arg("timestamps"), py::arg("values"),
        py::arg("epsilon") = 0.05, py::arg("samples") = 1000, py::arg("seed") = 0, py::arg("subwindow") = 0,
        py::arg("warmup") = py::none());

  py::class_<Detector>(m, "Detector")
      .def(py::init<const ModelBundle&, double, std::size_t, std::uint64_t, std::uint32_t, std::int64_t,
                    std::optional<std::int64_t>>(),
           py::arg("model"), py::arg("epsilon") = 0.05, py::arg("samples") = 1000, py::arg("seed") = 0,
           py::arg("subwindow") = 0, py::arg("first_interval") = 0, py::arg("warmup") = py::none())
      .def("event", &Detector::event, py::arg("timestamp"), py::arg("value"))
      .def("end_window", &Detector::end_window)
      .def("distribution", &Detector::distribution, py::arg("interval_index"), py::arg("probs"))
      .def("state", &Detector::state)
      .def("restore", &Detector::restore, py::arg("state"))
      .def_property_readonly("interval_index", &Detector::interval_index)
      .def_property_readonly("alpha", &Detector::alpha);

  m.attr("__version__") = "0.1.0";
}
