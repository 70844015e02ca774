// SPDX-License-Identifier: Apache-2.0
// One PASS/FAIL line per acceptance criterion.
//   acceptance [--strict] [--runs N] [--only 1,2,...]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "distad/eval.hpp"
#include "properties.hpp"

using namespace distad;
using distad::testing::PropertyResult;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [miss]");
  }
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string mean_std(const MeanStd& m, const char* spec = "%.2f") {
  return fmt(spec, m.mean) + "+-" + fmt(spec, m.std);
}

class Harness {
 public:
  explicit Harness(std::size_t runs) : runs_(runs) {}

  const ScenarioReport& report(const std::string& name) {
    if (reports_.empty()) run_scenarios();
    return reports_.at(name);
  }

 private:
  void run_scenarios() {
    ExperimentConfig c;
    c.runs = runs_;
    for (auto regime : {ObservationRegime::asymptotic, ObservationRegime::finite}) {
      for (const auto& s : standard_scenarios(regime)) c.scenarios.push_back(s);
    }
    ExperimentRunner runner(c);
    for (auto& r : runner.run_all()) reports_.emplace(r.scenario.name(), std::move(r));
  }

  std::size_t runs_;
  std::map<std::string, ScenarioReport> reports_;
};

Verdict asymptotic_fpr(Harness& h) {
  Verdict v;
  for (const char* n : {"asymp-ds1", "asymp-ds1-mu", "asymp-ds1-sigma", "asymp-ds2", "asymp-ds2-mu", "asymp-ds2-sigma"}) {
    const auto& r = h.report(n);
    v.require(r.fpr.mean >= 3.5 && r.fpr.mean <= 7.0, std::string(n) + " fpr " + mean_std(r.fpr));
  }
  return v;
}

Verdict asymptotic_recall(Harness& h) {
  Verdict v;
  for (const char* n : {"asymp-ds1-mu", "asymp-ds1-sigma", "asymp-ds2-mu", "asymp-ds2-sigma"}) {
    const auto& r = h.report(n);
    v.require(r.recall && r.recall->mean >= 98.0, std::string(n) + " recall " + mean_std(*r.recall));
  }
  return v;
}

Verdict finite_rates(Harness& h) {
  Verdict v;
  for (const auto& [n, floor] : std::vector<std::pair<const char*, double>>{
           {"finite-ds1-mu", 95.0}, {"finite-ds2-mu", 95.0}, {"finite-ds1-sigma", 88.0}, {"finite-ds2-sigma", 88.0}}) {
    const auto& r = h.report(n);
    v.require(r.fpr.mean >= 3.5 && r.fpr.mean <= 7.0, std::string(n) + " fpr " + mean_std(r.fpr));
    v.require(r.recall && r.recall->mean >= floor, std::string(n) + " recall " + mean_std(*r.recall));
  }
  return v;
}

Verdict finite_auc(Harness& h) {
  Verdict v;
  for (const auto& [n, floor] : std::vector<std::pair<const char*, double>>{
           {"finite-ds1-mu", 0.97}, {"finite-ds2-mu", 0.98}, {"finite-ds1-sigma", 0.96}, {"finite-ds2-sigma", 0.95}}) {
    const auto& r = h.report(n);
    v.require(r.auc && r.auc->mean >= floor, std::string(n) + " auc " + mean_std(*r.auc, "%.4f"));
  }
  return v;
}

Verdict point_pathway(std::size_t runs) {
  PointExperimentConfig c;
  c.runs = runs;
  std::vector<double> aucs;
  for (const auto& r : run_point_experiment(c)) aucs.push_back(r.auc);
  const auto m = summarize(aucs);
  Verdict v;
  v.require(m.mean >= 0.95, "single d=100 auc " + mean_std(m, "%.4f"));
  return v;
}

Verdict properties() {
  namespace t = distad::testing;
  const std::vector<std::pair<const char*, std::function<PropertyResult()>>> suites{
      {"dirmult-normalization", [] { return t::dirmult_normalization(1); }},
      {"dist-gradients", [] { return t::dist_gradients(2, 100); }},
      {"bptt-gradients", [] { return t::bptt_gradients(3, 20); }},
      {"mc-eta-agreement", [] { return t::mc_eta_agreement(4, 1000, 100000); }},
      {"level-set-coverage", [] { return t::level_set_coverage(5); }},
      {"stream-batch-equivalence", [] { return t::stream_batch_equivalence(6); }},
      {"auc-brute-force", [] { return t::auc_brute_force(7, 500); }},
  };
  Verdict v;
  for (const auto& [name, fn] : suites) {
    const auto r = fn();
    std::printf("      %-26s %s  %s\n", name, r.pass ? "ok  " : "FAIL", r.detail.c_str());
    std::fflush(stdout);
    v.require(r.pass, name);
  }
  return v;
}

Verdict state_bound() {
  const auto r = distad::testing::state_size_bound(80000);
  Verdict v;
  v.require(r.pass, r.detail);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::size_t runs = 10;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") {
      strict = true;
    } else if (a == "--runs" && i + 1 < argc) {
      runs = std::strtoul(argv[++i], nullptr, 10);
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: acceptance [--strict] [--runs N] [--only 1,2,...]\n");
      return 2;
    }
  }

  Harness harness(runs);
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"asymptotic FPR in [3.5, 7.0]", [&] { return asymptotic_fpr(harness); }},
      {"asymptotic recall >= 98", [&] { return asymptotic_recall(harness); }},
      {"finite FPR in [3.5, 7.0], recall >= 95 / 88", [&] { return finite_rates(harness); }},
      {"finite AUC thresholds", [&] { return finite_auc(harness); }},
      {"single-observation pathway AUC >= 0.95", [&] { return point_pathway(runs); }},
      {"property suites", properties},
      {"streaming state <= 80 KB", state_bound},
  };

  int failed = 0, passed = 0;
  try {
    for (std::size_t i = 0; i < criteria.size(); ++i) {
      const int id = static_cast<int>(i) + 1;
      if (!only.empty() && !only.count(id)) continue;
      const auto start = std::chrono::steady_clock::now();
      const Verdict v = criteria[i].second();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("criterion %d %s  %s (%.0fs)\n      %s\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                  v.detail.c_str());
      std::fflush(stdout);
      (v.pass ? passed : failed)++;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance harness error: %s\n", e.what());
    return 2;
  }
  std::printf("summary: %d passed, %d failed\n", passed, failed);
  return strict && failed > 0 ? 1 : 0;
}
