// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("distad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!HasFailure()) fs::remove_all(dir_);
  }

  int run(const std::string& args, const std::string& redirect = "") const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" DISTAD_CLI "' " + args + " " +
                            (redirect.empty() ? "> log.txt 2>&1" : redirect);
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  void simulate_and_train(const std::string& scenario) const {
    ASSERT_EQ(run("simulate --scenario " + scenario + " --seed 3 --learn 80 --detect 60 --out-dir ."), 0)
        << read("log.txt");
    ASSERT_EQ(run("train --data series.csv --out model.bin --epochs 3 --hidden 8 --learn-intervals 80"), 0)
        << read("log.txt");
  }

  /// Event stream lines for one sample series under the given metric id.
  std::vector<std::string> stream_lines(const std::string& metric) const {
    std::istringstream in(read("series.csv"));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> out;
    while (std::getline(in, line)) out.push_back(metric + "," + line);
    return out;
  }

  static std::vector<std::string> sorted_lines(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> v;
    for (std::string line; std::getline(in, line);) v.push_back(line);
    std::sort(v.begin(), v.end());
    return v;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EndToEndFromOneConfigFile) {
  write("run.json", R"({
    "simulate": {"scenario": "finite-ds2-mu", "seed": 5, "learn": 80, "detect": 60, "out-dir": "out"},
    "train": {"data": ["out/series.csv"], "out": "out/model.bin", "epochs": 3, "hidden": 8,
              "learn-intervals": 80, "seed": 5},
    "detect": {"model": "out/model.bin", "data": ["out/series.csv"], "out": "out/scores.csv",
               "samples": 300, "seed": 5},
    "evaluate": {"scores": "out/scores.csv", "labels": "out/labels.csv", "json": "out/report.json"}
  })");
  for (const char* cmd : {"simulate", "train", "detect", "evaluate"}) {
    ASSERT_EQ(run(std::string("--config run.json ") + cmd), 0) << cmd << ": " << read("log.txt");
  }
  const auto report = nlohmann::json::parse(read("out/report.json"));
  EXPECT_TRUE(report.contains("fpr"));
  EXPECT_GE(report["fpr"].get<double>(), 0.0);
  EXPECT_TRUE(read("out/scores.csv").starts_with("metric_id,interval_index,stage,log_p,flagged\n"));
}

TEST_F(Cli, CommandLineOverridesConfig) {
  write("sim.json", R"({"simulate": {"scenario": "finite-ds1", "learn": 10, "detect": 10, "out-dir": "a"}})");
  ASSERT_EQ(run("--config sim.json simulate --out-dir b"), 0) << read("log.txt");
  EXPECT_TRUE(fs::exists(dir_ / "b/series.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "a"));
}

TEST_F(Cli, DeterministicGivenSeed) {
  simulate_and_train("finite-ds1-sigma");
  const auto model = read("model.bin");
  const auto series = read("series.csv");
  ASSERT_EQ(run("simulate --scenario finite-ds1-sigma --seed 3 --learn 80 --detect 60 --out-dir ."), 0);
  ASSERT_EQ(run("train --data series.csv --out model2.bin --epochs 3 --hidden 8 --learn-intervals 80"), 0);
  EXPECT_EQ(read("series.csv"), series);
  EXPECT_EQ(read("model2.bin"), model);
  ASSERT_EQ(run("detect --model model.bin --data series.csv --out s1.csv --samples 300"), 0);
  ASSERT_EQ(run("detect --model model.bin --data series.csv --out s2.csv --samples 300"), 0);
  EXPECT_EQ(read("s1.csv"), read("s2.csv"));
}

TEST_F(Cli, StreamMatchesBatch) {
  simulate_and_train("finite-ds1-mu");
  ASSERT_EQ(run("detect --model model.bin --data series.csv --out batch.csv --samples 300"), 0) << read("log.txt");
  std::string stream = "metric_id,timestamp,value\n";
  for (const auto& l : stream_lines("series")) stream += l + "\n";
  write("stream.csv", stream);
  ASSERT_EQ(run("detect --model model.bin --stream stream.csv --out live.csv --samples 300"), 0) << read("log.txt");
  EXPECT_EQ(read("live.csv"), read("batch.csv"));
  ASSERT_EQ(run("detect --model model.bin --stream - --samples 300", "< stream.csv > stdout.csv 2> log.txt"), 0);
  EXPECT_EQ(read("stdout.csv"), read("batch.csv"));
}

TEST_F(Cli, InterleavedMetricsAreScoredIndependently) {
  simulate_and_train("finite-ds2-sigma");
  fs::copy_file(dir_ / "series.csv", dir_ / "alpha.csv");
  fs::copy_file(dir_ / "series.csv", dir_ / "beta.csv");
  ASSERT_EQ(run("detect --model model.bin --data alpha.csv beta.csv --out batch.csv --samples 300"), 0)
      << read("log.txt");
  const auto a = stream_lines("alpha"), b = stream_lines("beta");
  std::string stream;
  for (std::size_t i = 0; i < a.size(); ++i) stream += a[i] + "\n" + b[i] + "\n";
  write("stream.csv", stream);
  ASSERT_EQ(run("detect --model model.bin --stream stream.csv --out live.csv --samples 300"), 0) << read("log.txt");
  EXPECT_EQ(sorted_lines(read("live.csv")), sorted_lines(read("batch.csv")));
}

TEST_F(Cli, ResumeFromCheckpointMatchesUninterruptedRun) {
  simulate_and_train("finite-ds1-mu");
  std::string stream;
  for (const auto& l : stream_lines("m")) stream += l + "\n";
  write("stream.csv", stream);
  ASSERT_EQ(run("detect --model model.bin --stream stream.csv --out full.csv --samples 300"), 0);
  for (int cut : {1, 2500, 6001}) {
    const auto lim = std::to_string(cut);
    ASSERT_EQ(run("detect --model model.bin --stream stream.csv --out part.csv --samples 300 "
                  "--checkpoint ck.bin --checkpoint-every 1 --limit-lines " + lim),
              0)
        << read("log.txt");
    ASSERT_EQ(run("detect --model model.bin --stream stream.csv --out part.csv --samples 300 "
                  "--checkpoint ck.bin --resume"),
              0)
        << read("log.txt");
    EXPECT_EQ(read("part.csv"), read("full.csv")) << "cut at " << cut;
  }
}

TEST_F(Cli, AsymptoticQuantileSeries) {
  ASSERT_EQ(run("simulate --scenario asymp-ds1-mu --seed 2 --learn 60 --detect 40 --quantiles 99 --out-dir ."), 0)
      << read("log.txt");
  EXPECT_TRUE(read("series.csv").starts_with("timestamp,q1,q2,"));
  ASSERT_EQ(run("train --data series.csv --out model.bin --epochs 2 --hidden 8 --learn-intervals 60"), 0)
      << read("log.txt");
  EXPECT_NE(read("log.txt").find("mode asymptotic"), std::string::npos) << read("log.txt");
  ASSERT_EQ(run("detect --model model.bin --data series.csv --out scores.csv"), 0) << read("log.txt");
  const auto scores = read("scores.csv");
  EXPECT_NE(scores.find(",window,"), std::string::npos);
  EXPECT_EQ(scores.find(",point,"), std::string::npos);
  ASSERT_EQ(run("evaluate --scores scores.csv --labels labels.csv"), 0) << read("log.txt");
}

TEST_F(Cli, SinglePathway) {
  ASSERT_EQ(run("simulate --scenario single --seed 4 --learn 100 --detect 100 --out-dir ."), 0) << read("log.txt");
  ASSERT_EQ(run("train --data series.csv --out model.bin --epochs 2 --hidden 8 --learn-intervals 100 --bins 20"), 0)
      << read("log.txt");
  EXPECT_NE(read("log.txt").find("mode single"), std::string::npos) << read("log.txt");
  ASSERT_EQ(run("detect --model model.bin --data series.csv --out scores.csv"), 0) << read("log.txt");
  const auto scores = read("scores.csv");
  EXPECT_NE(scores.find(",point,"), std::string::npos);
  EXPECT_EQ(scores.find(",window,"), std::string::npos);
  ASSERT_EQ(run("evaluate --scores scores.csv --labels labels.csv"), 0) << read("log.txt");
}

TEST_F(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --data x.csv"), 1);
  EXPECT_EQ(run("simulate --scenario finite-ds1 --seed notanumber"), 1);
  EXPECT_EQ(run("train --data x.csv --out m.bin --mode fancy"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, DataErrorsExitWithTwo) {
  EXPECT_EQ(run("train --data missing.csv --out m.bin"), 2);
  write("bad.csv", "timestamp,value\n0,1\n60,oops\n");
  EXPECT_EQ(run("train --data bad.csv --out m.bin"), 2);
  EXPECT_NE(read("log.txt").find("line 3"), std::string::npos) << read("log.txt");
  simulate_and_train("finite-ds1");
  auto model = read("model.bin");
  model[model.size() / 2] ^= 0x5a;
  write("broken.bin", model);
  EXPECT_EQ(run("detect --model broken.bin --data series.csv --out s.csv"), 2);
  write("stream.csv", "m,0,1.0\nm,60\n");
  EXPECT_EQ(run("detect --model model.bin --stream stream.csv --out s.csv"), 2);
  write("bad.json", "{not json");
  EXPECT_NE(run("--config bad.json simulate --scenario finite-ds1"), 0);
}
