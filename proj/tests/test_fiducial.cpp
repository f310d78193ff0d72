#include "biozbp/demod.hpp"
#include "biozbp/fiducial.hpp"
#include "biozbp/preprocess.hpp"
#include "biozbp/synth.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace biozbp;

namespace {

struct ProcessedTrial {
  ProcessedSeries biz;
  ProcessedSeries ecg;
  synth::GroundTruth truth;
};

// ECG gets the band-pass its detector expects; BIOZ keeps the demodulated
// waveform (detrended), whose extrema the ground truth describes.
ProcessedTrial run_front_end(const synth::SynthConfig& cfg, double duration_s,
                             bool detrend = true) {
  auto [rec, truth] = synth::generate(cfg, duration_s);
  auto dm = demod::demodulate(rec, cfg.n_block);
  preprocess::FirSpec fir;
  fir.sample_rate_hz = dm.ecg_500.sample_rate_hz;
  const Vector taps = preprocess::design_fir(fir);
  ProcessedTrial out;
  out.biz = dm.biz_abs;
  out.ecg = preprocess::apply_fir(dm.ecg_500, taps);
  if (detrend) {
    preprocess::SgSpec sg;
    out.biz = preprocess::apply_sg(out.biz, sg, preprocess::SgMode::Detrend);
  }
  out.truth = std::move(truth);
  return out;
}

// Nearest-match error in seconds, or +inf when nothing is close.
double nearest_error(const std::vector<double>& detected, double t) {
  double best = 1e300;
  for (double d : detected) best = std::min(best, std::abs(d - t));
  return best;
}

}  // namespace

TEST_CASE("clean synthetic ECG: one peak per second within 2 ms") {
  synth::SynthConfig cfg;
  cfg.heart_rate_bpm = 60.0;
  cfg.seed = 3;
  ProcessedTrial trial = run_front_end(cfg, 30.0);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  const double dur = trial.ecg.duration_s();
  std::size_t checked = 0;
  for (double t : trial.truth.r_peak_times_s) {
    if (t < 0.5 || t > dur - 0.5) continue;
    CHECK(nearest_error(peaks, t) <= 0.002);
    ++checked;
  }
  CHECK(checked >= 28);
  // No duplicate detections inside the refractory window.
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    CHECK(peaks[i] - peaks[i - 1] >= 0.25);
  }
}

TEST_CASE("R detection works across heart rates") {
  for (double hr : {48.0, 75.0, 110.0}) {
    synth::SynthConfig cfg;
    cfg.heart_rate_bpm = hr;
    cfg.ptt_s = 0.15;
    cfg.seed = 17;
    ProcessedTrial trial = run_front_end(cfg, 20.0);
    auto peaks = fiducial::detect_r_peaks(trial.ecg);
    const double dur = trial.ecg.duration_s();
    for (double t : trial.truth.r_peak_times_s) {
      if (t < 0.5 || t > dur - 0.5) continue;
      CHECK(nearest_error(peaks, t) <= 0.002);
    }
  }
}

TEST_CASE("noisy ECG at 20 dB: at least 99 percent within 4 ms") {
  std::size_t total = 0, good = 0;
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL, 15ULL}) {
    synth::SynthConfig cfg;
    cfg.heart_rate_bpm = 72.0;
    cfg.noise_enabled = true;
    cfg.noise_snr_db = 20.0;
    cfg.seed = seed;
    ProcessedTrial trial = run_front_end(cfg, 30.0);
    auto peaks = fiducial::detect_r_peaks(trial.ecg);
    const double dur = trial.ecg.duration_s();
    for (double t : trial.truth.r_peak_times_s) {
      if (t < 0.5 || t > dur - 0.5) continue;
      ++total;
      good += nearest_error(peaks, t) <= 0.004 ? 1 : 0;
    }
    for (std::size_t i = 1; i < peaks.size(); ++i) {
      CHECK(peaks[i] - peaks[i - 1] >= 0.25);
    }
  }
  REQUIRE(total >= 100);
  CHECK(static_cast<double>(good) / total >= 0.99);
}

TEST_CASE("flat signal raises NoPeaksFound") {
  ProcessedSeries flat;
  flat.values = Vector::Zero(5000);
  flat.sample_rate_hz = 500.0;
  flat.kind = SeriesKind::Ecg;
  CHECK_THROWS_AS(fiducial::detect_r_peaks(flat), Error);
}

TEST_CASE("cycle fiducials on clean data match ground truth within 2 ms") {
  synth::SynthConfig cfg;
  cfg.heart_rate_bpm = 66.0;
  cfg.ptt_s = 0.22;
  cfg.seed = 5;
  ProcessedTrial trial = run_front_end(cfg, 30.0, /*detrend=*/false);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  auto cycles = fiducial::detect_cycle_fiducials(trial.biz, peaks);
  REQUIRE(cycles.size() >= 25);
  std::size_t valid = 0;
  for (const auto& c : cycles) {
    if (!c.valid) continue;
    ++valid;
    CHECK(nearest_error(trial.truth.biz_min_times_s, c.t_min) <= 0.002);
    CHECK(nearest_error(trial.truth.biz_max_times_s, c.t_max) <= 0.002);
    CHECK(nearest_error(trial.truth.biz_md_times_s, c.t_md) <= 0.002);
    CHECK(c.hi_min <= c.hi_md);
    CHECK(c.hi_md <= c.hi_max);
  }
  CHECK(valid == cycles.size());  // clean data: nothing flagged
}

TEST_CASE("detrended pipeline keeps interior fiducials within 4 ms") {
  // The 20 s SG baseline window follows the waveform near the trial edges;
  // interior cycles stay accurate after detrending.
  synth::SynthConfig cfg;
  cfg.heart_rate_bpm = 66.0;
  cfg.ptt_s = 0.22;
  cfg.seed = 5;
  ProcessedTrial trial = run_front_end(cfg, 30.0, /*detrend=*/true);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  auto cycles = fiducial::detect_cycle_fiducials(trial.biz, peaks);
  const double dur = trial.biz.duration_s();
  std::size_t checked = 0;
  for (const auto& c : cycles) {
    if (!c.valid || c.t_min < 8.0 || c.t_min_next > dur - 8.0) continue;
    CHECK(nearest_error(trial.truth.biz_min_times_s, c.t_min) <= 0.006);
    CHECK(nearest_error(trial.truth.biz_max_times_s, c.t_max) <= 0.006);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("fewer than two R peaks is rejected") {
  ProcessedSeries biz;
  biz.values = Vector::Zero(5000);
  biz.sample_rate_hz = 500.0;
  CHECK_THROWS_AS(fiducial::detect_cycle_fiducials(biz, {1.0}), Error);
}

TEST_CASE("monotone ramp: min at window start, max at end, MD degenerate") {
  ProcessedSeries biz;
  const Eigen::Index n = 3000;
  biz.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) biz.values(i) = 0.01 * i;
  biz.sample_rate_hz = 500.0;
  std::vector<double> r_times = {1.0, 2.0, 3.0, 4.0};
  auto cycles = fiducial::detect_cycle_fiducials(biz, r_times);
  REQUIRE(cycles.size() == 2);
  for (const auto& c : cycles) {
    CHECK(!c.valid);
    CHECK(c.flag_reason == "DegenerateMd");
    CHECK(c.t_min == doctest::Approx(c.t_r).epsilon(1e-6));
    // Max search window is [t_min, next t_r]; ramp peaks at its end.
    CHECK(c.t_max == doctest::Approx(c.t_r + 1.0).epsilon(1e-3));
  }
}

TEST_CASE("shift equivariance of fiducial times") {
  synth::SynthConfig cfg;
  cfg.seed = 8;
  ProcessedTrial trial = run_front_end(cfg, 20.0);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  auto cycles = fiducial::detect_cycle_fiducials(trial.biz, peaks);

  const Eigen::Index shift = 250;  // samples
  const double dt = shift / trial.biz.sample_rate_hz;
  ProcessedSeries shifted = trial.biz;
  shifted.values = trial.biz.values.tail(trial.biz.size() - shift).eval();
  std::vector<double> shifted_peaks;
  for (double t : peaks) {
    if (t - dt > 0.0) shifted_peaks.push_back(t - dt);
  }
  auto shifted_cycles =
      fiducial::detect_cycle_fiducials(shifted, shifted_peaks);

  // Compare cycles anchored at the same R peak.
  std::size_t compared = 0;
  for (const auto& c : cycles) {
    if (!c.valid) continue;
    for (const auto& s : shifted_cycles) {
      if (!s.valid) continue;
      if (std::abs((c.t_r - dt) - s.t_r) < 1e-9) {
        CHECK(std::abs((c.t_min - dt) - s.t_min) < 1e-9);
        CHECK(std::abs((c.t_max - dt) - s.t_max) < 1e-9);
        CHECK(std::abs((c.t_md - dt) - s.t_md) < 1e-9);
        ++compared;
      }
    }
  }
  CHECK(compared >= 10);
}

TEST_CASE("amplitude scaling leaves times unchanged and scales heights") {
  synth::SynthConfig cfg;
  cfg.seed = 21;
  ProcessedTrial trial = run_front_end(cfg, 15.0);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  auto base = fiducial::detect_cycle_fiducials(trial.biz, peaks);

  const double k = 3.7;
  ProcessedSeries scaled = trial.biz;
  scaled.values *= k;
  auto scaled_cycles = fiducial::detect_cycle_fiducials(scaled, peaks);
  REQUIRE(base.size() == scaled_cycles.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!base[i].valid) continue;
    CHECK(base[i].t_min == doctest::Approx(scaled_cycles[i].t_min).epsilon(1e-12));
    CHECK(base[i].t_max == doctest::Approx(scaled_cycles[i].t_max).epsilon(1e-12));
    CHECK(base[i].t_md == doctest::Approx(scaled_cycles[i].t_md).epsilon(1e-12));
    CHECK(scaled_cycles[i].hi_max ==
          doctest::Approx(k * base[i].hi_max).epsilon(1e-9));
    CHECK(scaled_cycles[i].hi_min ==
          doctest::Approx(k * base[i].hi_min).epsilon(1e-9));
  }
}

TEST_CASE("two identical cycles give identical offsets relative to t_r") {
  // Strictly periodic synthetic trace: every valid cycle's fiducial offsets
  // from its own R peak agree.
  synth::SynthConfig cfg;
  cfg.heart_rate_bpm = 60.0;
  cfg.seed = 2;
  ProcessedTrial trial = run_front_end(cfg, 12.0, /*detrend=*/false);
  auto peaks = fiducial::detect_r_peaks(trial.ecg);
  auto cycles = fiducial::detect_cycle_fiducials(trial.biz, peaks);
  std::vector<double> offsets;
  for (const auto& c : cycles) {
    if (c.valid) offsets.push_back(c.t_min - c.t_r);
  }
  REQUIRE(offsets.size() >= 5);
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    CHECK(offsets[i] == doctest::Approx(offsets[0]).epsilon(0.02));
  }
}

TEST_CASE("flagged cycle count is reported") {
  ProcessedSeries biz;
  biz.values = Vector::Zero(3000);
  biz.sample_rate_hz = 500.0;
  auto cycles = fiducial::detect_cycle_fiducials(biz, {1.0, 2.0, 3.0});
  CHECK(fiducial::count_flagged(cycles) == cycles.size());
}
