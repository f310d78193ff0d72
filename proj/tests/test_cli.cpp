// End-to-end exercises of the command-line tool: every subcommand, the
// manifest replay contract, and error reporting with stage attribution.
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

#ifndef BIOZBP_CLI
#define BIOZBP_CLI "./biozbp"
#endif

int run(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(BIOZBP_CLI) + " " + args +
                          " > /tmp/biozbp_cli_out.txt 2> /tmp/biozbp_cli_err.txt";
  const int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream f("/tmp/biozbp_cli_out.txt");
    std::stringstream ss;
    ss << f.rdbuf();
    *out = ss.str();
  }
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synth writes trials, labels and ground truth sidecars") {
  fs::remove_all("/tmp/bz_synth");
  const int rc = run(
      "synth --subjects 1 --trials 2 --duration 12 --seed 9 "
      "--out-dir /tmp/bz_synth --format csv");
  CHECK(rc == 0);
  CHECK(fs::exists("/tmp/bz_synth/s00_t00.csv"));
  CHECK(fs::exists("/tmp/bz_synth/s00_t01.csv"));
  CHECK(fs::exists("/tmp/bz_synth/s00_t00_truth.json"));
  CHECK(fs::exists("/tmp/bz_synth/labels.csv"));
  CHECK(fs::exists("/tmp/bz_synth/manifest_synth.json"));
}

TEST_CASE("demod and preprocess chain on a synthesized trial") {
  const int rc = run(
      "demod --in /tmp/bz_synth/s00_t00.csv --out-prefix /tmp/bz_demod "
      "--kinds abs,real,imag");
  CHECK(rc == 0);
  CHECK(fs::exists("/tmp/bz_demod_biz_abs.csv"));
  CHECK(fs::exists("/tmp/bz_demod_biz_real.csv"));
  CHECK(fs::exists("/tmp/bz_demod_biz_imag.csv"));
  CHECK(fs::exists("/tmp/bz_demod_ecg.csv"));

  const int rc2 = run(
      "preprocess --biz /tmp/bz_demod_biz_abs.csv --ecg /tmp/bz_demod_ecg.csv "
      "--out-prefix /tmp/bz_prep");
  CHECK(rc2 == 0);
  CHECK(fs::exists("/tmp/bz_prep_biz.csv"));
  CHECK(fs::exists("/tmp/bz_prep_ecg.csv"));
}

TEST_CASE("extract, summary, select and train run on the processed trial") {
  const int rc = run(
      "extract --biz /tmp/bz_prep_biz.csv --ecg /tmp/bz_prep_ecg.csv "
      "--sbp 123 --dbp 81 --group s00/t00 --out /tmp/bz_features.csv");
  CHECK(rc == 0);
  CHECK(fs::exists("/tmp/bz_features.csv"));

  CHECK(run("summary --table /tmp/bz_features.csv --out /tmp/bz_summary.csv") ==
        0);

  // A single trial's labels are constant, so impurity ranking must fail with
  // a degenerate-target error and a distinct nonzero exit code.
  const int rc2 = run(
      "select --table /tmp/bz_features.csv --method impurity --k 3 "
      "--ranking-out /tmp/bz_rank.csv");
  CHECK(rc2 != 0);
  const std::string err = slurp("/tmp/biozbp_cli_err.txt");
  CHECK(err.find("DegenerateTarget") != std::string::npos);
  CHECK(err.find("featsel") != std::string::npos);
}

TEST_CASE("pipeline runs end to end and is byte-deterministic") {
  fs::remove_all("/tmp/bz_pipe_a");
  fs::remove_all("/tmp/bz_pipe_b");
  const std::string flags =
      "pipeline --subjects 2 --trials 2 --duration 12 --seed 4 --k 3 "
      "--folds 3 --n-trees 20 --label-noise-sd 1.0 ";
  CHECK(run(flags + "--out-dir /tmp/bz_pipe_a") == 0);
  CHECK(run(flags + "--out-dir /tmp/bz_pipe_b") == 0);

  const char* files[] = {"features.csv",     "features_selected.csv",
                         "ranking.csv",      "sbp_report.json",
                         "dbp_report.json",  "report.txt",
                         "summary.csv",      "sbp_bland_altman.csv",
                         "dbp_bland_altman_limits.csv"};
  for (const char* f : files) {
    INFO(f);
    const std::string a = slurp(std::string("/tmp/bz_pipe_a/") + f);
    const std::string b = slurp(std::string("/tmp/bz_pipe_b/") + f);
    CHECK(!a.empty());
    CHECK(a == b);
  }
}

TEST_CASE("manifest replay reproduces artifacts bit-exactly") {
  const std::string before = slurp("/tmp/bz_pipe_a/sbp_report.json");
  const std::string features_before = slurp("/tmp/bz_pipe_a/features.csv");
  REQUIRE(!before.empty());
  CHECK(run("replay /tmp/bz_pipe_a/manifest_pipeline.json") == 0);
  CHECK(slurp("/tmp/bz_pipe_a/sbp_report.json") == before);
  CHECK(slurp("/tmp/bz_pipe_a/features.csv") == features_before);
}

TEST_CASE("evaluate consumes a feature table and emits reports") {
  const int rc = run(
      "evaluate --table /tmp/bz_pipe_a/features.csv --model rf --k 3 "
      "--n-trees 20 --folds 3 --target both --out-prefix /tmp/bz_eval");
  CHECK(rc == 0);
  CHECK(fs::exists("/tmp/bz_eval_sbp_report.json"));
  CHECK(fs::exists("/tmp/bz_eval_dbp_report.json"));
  CHECK(fs::exists("/tmp/bz_eval_sbp_bland_altman_limits.csv"));

  std::string text;
  CHECK(run("report --in /tmp/bz_eval_sbp_report.json", &text) == 0);
  CHECK(text.find("SBP") != std::string::npos);
  CHECK(text.find("AAMI") != std::string::npos);
}

TEST_CASE("train persists a model file") {
  const int rc = run(
      "train --table /tmp/bz_pipe_a/features.csv --model rf --n-trees 10 "
      "--target sbp --out /tmp/bz_model.json");
  CHECK(rc == 0);
  CHECK(fs::exists("/tmp/bz_model.json"));
}

TEST_CASE("missing input yields a nonzero exit and stage attribution") {
  const int rc = run("demod --in /tmp/nonexistent_trial.csv");
  CHECK(rc != 0);
  const std::string err = slurp("/tmp/biozbp_cli_err.txt");
  CHECK(err.find("dataset-io") != std::string::npos);
}

TEST_CASE("select supports the top-K error sweep export") {
  const int rc = run(
      "select --table /tmp/bz_pipe_a/features.csv --method impurity --k 3 "
      "--n-trees 20 --folds 3 --sweep-grid 2,5,42 "
      "--sweep-out /tmp/bz_sweep.csv --ranking-out /tmp/bz_rank2.csv");
  CHECK(rc == 0);
  std::ifstream f("/tmp/bz_sweep.csv");
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header == "k,mae_mmhg,rmse_mmhg");
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("extract can export per-cycle fiducials for inspection") {
  const int rc = run(
      "extract --biz /tmp/bz_prep_biz.csv --ecg /tmp/bz_prep_ecg.csv "
      "--sbp 123 --dbp 81 --group s00/t00 --out /tmp/bz_features2.csv "
      "--cycles-out /tmp/bz_cycles.csv");
  CHECK(rc == 0);
  std::ifstream f("/tmp/bz_cycles.csv");
  REQUIRE(f.good());
  std::string header;
  std::getline(f, header);
  CHECK(header.rfind("t_r,t_min", 0) == 0);
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) ++rows;
  CHECK(rows >= 5);
}
