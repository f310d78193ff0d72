#include "biozbp/demod.hpp"
#include "biozbp/synth.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace biozbp;
using demod::BlockEstimate;

namespace {
constexpr double kPi = std::numbers::pi;

Vector sinusoid(int n, double amp, double f, double fs, double phase,
                double dc = 0.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = dc + amp * std::sin(2.0 * kPi * f * i / fs + phase);
  }
  return v;
}
}  // namespace

TEST_CASE("exact sinusoid fit recovers amplitude and phase") {
  const double fs = 100000.0, f = 10000.0;
  Vector vs = sinusoid(200, 0.5, f, fs, 0.3);
  Vector vr = sinusoid(200, 0.25, f, fs, 0.3);
  BlockEstimate est = demod::estimate_block(vs, vr, f, fs);
  CHECK(est.a_s == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(est.a_r == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(std::abs(est.phi_s - est.phi_r) < 1e-9);
}

TEST_CASE("fit is exact with DC offset and non-integer cycle count") {
  const double fs = 100000.0, f = 9973.0;  // non-integer cycles per block
  Vector vs = sinusoid(200, 0.7, f, fs, 1.1, 0.2);
  Vector vr = sinusoid(200, 0.35, f, fs, 0.4, -0.1);
  BlockEstimate est = demod::estimate_block(vs, vr, f, fs);
  CHECK(est.a_s == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(est.a_r == doctest::Approx(0.35).epsilon(1e-9));
  CHECK(est.phi_s - est.phi_r == doctest::Approx(0.7).epsilon(1e-7));
}

TEST_CASE("zero vr channel is a degenerate block") {
  const double fs = 100000.0, f = 10000.0;
  Vector vs = sinusoid(200, 0.5, f, fs, 0.0);
  Vector vr = Vector::Zero(200);
  CHECK_THROWS_AS(demod::estimate_block(vs, vr, f, fs), Error);
  try {
    demod::estimate_block(vs, vr, f, fs);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateBlock);
  }
}

TEST_CASE("aliased excitation is rejected") {
  Vector vs = sinusoid(200, 0.5, 10000.0, 100000.0, 0.0);
  CHECK_THROWS_AS(demod::estimate_block(vs, vs, 60000.0, 100000.0), Error);
}

TEST_CASE("phase-shift equivariance of the block estimator") {
  const double fs = 100000.0, f = 10000.0;
  for (int k : {1, 3, 7}) {
    Vector vs = sinusoid(400, 0.5, f, fs, 0.2);
    Vector vr = sinusoid(400, 0.2, f, fs, -0.5);
    BlockEstimate a = demod::estimate_block(vs.head(200), vr.head(200), f, fs);
    BlockEstimate b =
        demod::estimate_block(vs.segment(k, 200), vr.segment(k, 200), f, fs);
    CHECK(a.a_s == doctest::Approx(b.a_s).epsilon(1e-9));
    CHECK(a.a_r == doctest::Approx(b.a_r).epsilon(1e-9));
    const double da = a.phi_s - a.phi_r;
    const double db = b.phi_s - b.phi_r;
    CHECK(da == doctest::Approx(db).epsilon(1e-9));
  }
}

TEST_CASE("40 dB SNR amplitude error stays below 1 percent RMS") {
  const double fs = 100000.0, f = 10000.0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.5 / std::sqrt(2.0) * 0.01);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  double err2 = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const double ph = phase(rng);
    Vector vs = sinusoid(200, 0.5, f, fs, ph);
    Vector vr = sinusoid(200, 0.5, f, fs, ph);
    for (int i = 0; i < 200; ++i) {
      vs(i) += noise(rng);
      vr(i) += noise(rng);
    }
    BlockEstimate est = demod::estimate_block(vs, vr, f, fs);
    err2 += (est.a_s - 0.5) * (est.a_s - 0.5);
  }
  const double rms = std::sqrt(err2 / trials);
  CHECK(rms < 0.01 * 0.5);
}

TEST_CASE("impedance relation: forced values") {
  BlockEstimate b;
  b.a_s = 2.0;
  b.a_r = 1.0;
  b.phi_s = 0.0;
  b.phi_r = 0.0;
  auto z = demod::impedance_from_block(b, 10000.0);
  CHECK(z.real_ohm == doctest::Approx(10000.0));
  CHECK(z.imag_ohm == doctest::Approx(0.0));
  CHECK(z.abs_ohm == doctest::Approx(10000.0));

  b.a_s = 1.0;
  z = demod::impedance_from_block(b, 10000.0);
  CHECK(std::abs(z.real_ohm) < 1e-12);
  CHECK(std::abs(z.abs_ohm) < 1e-12);
}

TEST_CASE("impedance relation matches the complex-arithmetic oracle") {
  BlockEstimate b;
  b.a_s = 1.01;
  b.a_r = 1.0;
  b.phi_s = 0.02;
  b.phi_r = 0.0;
  auto z = demod::impedance_from_block(b, 10000.0);
  auto zo = oracles::eq6_complex(1.01, 1.0, 0.02, 10000.0);
  CHECK(z.real_ohm == doctest::Approx(zo.real).epsilon(1e-12));
  CHECK(z.imag_ohm == doctest::Approx(zo.imag).epsilon(1e-12));
  CHECK(z.abs_ohm == doctest::Approx(zo.abs).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(0.01, 10.0);
  std::uniform_real_distribution<double> ph(-3.0, 3.0);
  std::uniform_real_distribution<double> res(10.0, 1e5);
  for (int t = 0; t < 20000; ++t) {
    BlockEstimate bb;
    bb.a_s = amp(rng);
    bb.a_r = amp(rng);
    bb.phi_s = ph(rng);
    bb.phi_r = 0.0;
    const double r0 = res(rng);
    auto zi = demod::impedance_from_block(bb, r0);
    auto zz = oracles::eq6_complex(bb.a_s, bb.a_r, bb.phi_s, r0);
    const double scale = std::max(1.0, zz.abs);
    CHECK(std::abs(zi.real_ohm - zz.real) <= 1e-12 * scale);
    CHECK(std::abs(zi.imag_ohm - zz.imag) <= 1e-12 * scale);
    CHECK(std::abs(zi.abs_ohm - zz.abs) <= 1e-12 * scale);
  }
}

TEST_CASE("impedance is linear in r0") {
  BlockEstimate b;
  b.a_s = 1.3;
  b.a_r = 0.9;
  b.phi_s = 0.4;
  b.phi_r = 0.1;
  auto z1 = demod::impedance_from_block(b, 5000.0);
  auto z2 = demod::impedance_from_block(b, 10000.0);
  CHECK(z2.real_ohm == doctest::Approx(2.0 * z1.real_ohm).epsilon(1e-12));
  CHECK(z2.imag_ohm == doctest::Approx(2.0 * z1.imag_ohm).epsilon(1e-12));
  CHECK(z2.abs_ohm == doctest::Approx(2.0 * z1.abs_ohm).epsilon(1e-12));
}

TEST_CASE("demodulate: shapes, rates and logs") {
  synth::SynthConfig cfg;
  cfg.trial_id = "t01";
  auto [rec, truth] = synth::generate(cfg, 30.0);
  REQUIRE(rec.size() == 3000000);
  auto out = demod::demodulate(rec, 200);
  CHECK(out.biz_abs.size() == 15000);
  CHECK(out.biz_abs.sample_rate_hz == doctest::Approx(500.0));
  CHECK(out.ecg_500.size() == 15000);
  CHECK(out.ecg_500.sample_rate_hz == doctest::Approx(500.0));
  CHECK(out.biz_abs.processing_log.size() == 1);
  CHECK(out.ecg_500.kind == SeriesKind::Ecg);
  CHECK(out.biz_real.kind == SeriesKind::BiozReal);
}

TEST_CASE("noise-free closure against the synthetic ground truth") {
  synth::SynthConfig cfg;
  cfg.seed = 42;
  auto [rec, truth] = synth::generate(cfg, 12.0);
  auto out = demod::demodulate(rec, 200);
  REQUIRE(out.biz_abs.size() == truth.clean_impedance.size());
  const double err =
      (out.biz_abs.values - truth.clean_impedance).array().abs().maxCoeff();
  CHECK(err < 1e-6);
}

TEST_CASE("ECG block average of a constant stream is constant") {
  synth::SynthConfig cfg;
  auto [rec, truth] = synth::generate(cfg, 10.0);
  rec.ecg_samples.setConstant(1.0);
  auto out = demod::demodulate(rec, 200);
  CHECK((out.ecg_500.values.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("abs series dominates real and imag components") {
  // Independent real/imag modulation built directly from the inverted
  // relation; |z| >= |Re z| and |z| >= |Im z| sample by sample, so the
  // series amplitude ordering follows.
  const double fs = 100000.0, f = 10000.0, r0 = 1000.0;
  const int n_block = 200, blocks = 100;
  RawRecording rec;
  rec.sample_rate_hz = fs;
  rec.excitation_freq_hz = f;
  rec.r0_ohm = r0;
  rec.duration_s = blocks * n_block / fs;
  rec.vs_samples.resize(blocks * n_block);
  rec.vr_samples.resize(blocks * n_block);
  rec.ecg_samples = Vector::Zero(blocks * n_block);
  for (int b = 0; b < blocks; ++b) {
    const double zr = 60.0 + 25.0 * std::sin(2.0 * kPi * b / 37.0);
    const double zi = 40.0 + 18.0 * std::cos(2.0 * kPi * b / 23.0);
    const std::complex<double> ratio(zr / r0 + 1.0, zi / r0);
    for (int i = 0; i < n_block; ++i) {
      const double t = (b * n_block + i) / fs;
      rec.vs_samples(b * n_block + i) = 0.5 * std::sin(2.0 * kPi * f * t);
      rec.vr_samples(b * n_block + i) =
          0.5 / std::abs(ratio) *
          std::sin(2.0 * kPi * f * t - std::arg(ratio));
    }
  }
  auto out = demod::demodulate(rec, n_block);
  for (int b = 0; b < blocks; ++b) {
    CHECK(out.biz_abs.values(b) >= std::abs(out.biz_real.values(b)) - 1e-9);
    CHECK(out.biz_abs.values(b) >= std::abs(out.biz_imag.values(b)) - 1e-9);
  }
  const double amp_abs =
      out.biz_abs.values.maxCoeff() - out.biz_abs.values.minCoeff();
  CHECK(amp_abs > 0.0);
}

TEST_CASE("trailing partial block is dropped with a count") {
  synth::SynthConfig cfg;
  auto [rec, truth] = synth::generate(cfg, 10.0);
  RawRecording trimmed = rec;
  const Eigen::Index n = rec.size() - 77;
  trimmed.vs_samples = rec.vs_samples.head(n);
  trimmed.vr_samples = rec.vr_samples.head(n);
  trimmed.ecg_samples = rec.ecg_samples.head(n);
  trimmed.duration_s = n / rec.sample_rate_hz;
  auto out = demod::demodulate(trimmed, 200);
  CHECK(out.dropped_trailing_samples == 200 - 77);
  CHECK(out.biz_abs.size() == n / 200);
}
