#include "biozbp/demod.hpp"
#include "biozbp/features.hpp"
#include "biozbp/preprocess.hpp"
#include "biozbp/synth.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace biozbp;
using features::CycleFiducials;

namespace {

constexpr double kPi = std::numbers::pi;

ProcessedSeries series_of(const Vector& v, double rate = 500.0) {
  ProcessedSeries s;
  s.values = v;
  s.sample_rate_hz = rate;
  s.kind = SeriesKind::BiozAbs;
  return s;
}

// Triangle pulse: 0 at t=0, peak 1 at t=0.2, back to 0 at t=0.8 (500 Hz).
ProcessedSeries triangle_series() {
  Vector v(401);
  for (int k = 0; k <= 400; ++k) {
    const double t = k / 500.0;
    v(k) = t <= 0.2 ? t / 0.2 : (0.8 - t) / 0.6;
  }
  return series_of(v);
}

CycleFiducials triangle_cycle() {
  CycleFiducials c;
  c.t_r = -0.05;
  c.t_min = 0.0;
  c.t_md = 0.1;
  c.t_max = 0.2;
  c.t_min_next = 0.8;
  c.hi_min = 0.0;
  c.hi_md = 0.5;
  c.hi_max = 1.0;
  c.hi_min_next = 0.0;
  return c;
}

// One raised-cosine cycle: T = 1 s, systolic fraction s, excursion dz.
struct RaisedCosine {
  double s = 0.3;
  double dz = 32.0;
  double period = 1.0;
  ProcessedSeries series;
  CycleFiducials cycle;

  RaisedCosine() {
    Vector v(501);
    for (int k = 0; k <= 500; ++k) {
      v(k) = synth::pulse_height(k / 500.0 / period, s, dz);
    }
    series = series_of(v);
    cycle.t_r = -0.1;
    cycle.t_min = 0.0;
    cycle.t_md = 0.5 * s * period;
    cycle.t_max = s * period;
    cycle.t_min_next = period;
    cycle.hi_min = 0.0;
    cycle.hi_md = 0.5 * dz;
    cycle.hi_max = dz;
    cycle.hi_min_next = 0.0;
  }

  double tau_asc(double q) const { return s / kPi * std::acos(1.0 - 2.0 * q); }
  double tau_desc(double q) const {
    return s + (period - s) / kPi * std::acos(2.0 * q - 1.0);
  }
};

}  // namespace

TEST_CASE("PTT features: plug-in and averaging") {
  CycleFiducials c;
  c.t_r = 1.0;
  c.t_min = 1.1;
  c.t_md = 1.18;
  c.t_max = 1.3;
  c.t_min_next = 1.9;
  c.hi_min = 0.0;
  c.hi_md = 0.5;
  c.hi_max = 1.0;
  auto f = features::ptt_features({c});
  CHECK(f.ptt_max == doctest::Approx(0.3));
  CHECK(f.ptt_min == doctest::Approx(0.1));
  CHECK(f.pat == doctest::Approx(0.18));

  CycleFiducials c2 = c;
  c2.t_max = 1.32;
  auto f2 = features::ptt_features({c, c2});
  CHECK(f2.ptt_max == doctest::Approx(0.31));

  CycleFiducials flagged = c;
  flagged.valid = false;
  CHECK_THROWS_AS(features::ptt_features({flagged}), Error);
}

TEST_CASE("triangle widths match the similar-triangles geometry") {
  auto w = features::width_features({triangle_cycle()}, triangle_series());
  const double tol = 0.002;  // one sample
  CHECK(std::abs(w.sw - 0.2) < tol);
  CHECK(std::abs(w.dw - 0.6) < tol);
  CHECK(std::abs(w.pw - 0.8) < tol);
  CHECK(std::abs(w.pw50 - 0.4) < tol);
  CHECK(std::abs(w.pwr50 - 0.5) < tol);
  CHECK(std::abs(w.pw25 - 0.6) < tol);
  CHECK(std::abs(w.pwr25 - 0.75) < tol);
  CHECK(std::abs(w.pw75 - 0.2) < tol);
  CHECK(std::abs(w.pw90 - 0.08) < tol);
  // Structural identities.
  CHECK(w.pw == doctest::Approx(w.sw + w.dw).epsilon(1e-9));
  CHECK(w.pwr25 >= w.pwr50);
  CHECK(w.pwr50 >= w.pwr75);
  CHECK(w.pwr75 >= w.pwr90);
}

TEST_CASE("raised-cosine widths match the closed-form inverse") {
  RaisedCosine rc;
  auto w = features::width_features({rc.cycle}, rc.series);
  const double tol = 0.002;
  CHECK(std::abs(w.sw - rc.s) < tol);
  CHECK(std::abs(w.dw - (rc.period - rc.s)) < tol);
  CHECK(std::abs(w.pw - rc.period) < tol);
  const double qs[4] = {0.25, 0.50, 0.75, 0.90};
  const double got_sw[4] = {w.sw25, w.sw50, w.sw75, w.sw90};
  const double got_dw[4] = {w.dw25, w.dw50, w.dw75, w.dw90};
  const double got_pw[4] = {w.pw25, w.pw50, w.pw75, w.pw90};
  const double got_pwr[4] = {w.pwr25, w.pwr50, w.pwr75, w.pwr90};
  for (int i = 0; i < 4; ++i) {
    const double sw_true = rc.s - rc.tau_asc(qs[i]);
    const double dw_true = rc.tau_desc(qs[i]) - rc.s;
    CHECK(std::abs(got_sw[i] - sw_true) < tol);
    CHECK(std::abs(got_dw[i] - dw_true) < tol);
    CHECK(std::abs(got_pw[i] - (sw_true + dw_true)) < tol);
    CHECK(std::abs(got_pwr[i] - (sw_true + dw_true) / rc.period) < 0.005);
  }
}

TEST_CASE("height features: plug-in, flat and zero-min guard") {
  CycleFiducials c = triangle_cycle();
  c.hi_min = 2.0;
  c.hi_md = 3.0;
  c.hi_max = 6.0;
  auto h = features::height_features({c});
  CHECK(h.pp == doctest::Approx(4.0));
  CHECK(h.hir_max == doctest::Approx(3.0));
  CHECK(h.hir_md == doctest::Approx(1.5));
  CHECK(h.ratios_valid);

  c.hi_min = 6.0;
  c.hi_md = 6.0;
  c.hi_max = 6.0;
  h = features::height_features({c});
  CHECK(h.pp == doctest::Approx(0.0));
  CHECK(h.hir_max == doctest::Approx(1.0));

  c.hi_min = 0.0;
  c.hi_md = 3.0;
  c.hi_max = 6.0;
  h = features::height_features({c});
  CHECK(!h.ratios_valid);          // ZeroMinHeight
  CHECK(h.pp == doctest::Approx(6.0));  // PP still reported
}

TEST_CASE("slope features: triangle, homogeneity, closed form") {
  auto s = features::slope_features({triangle_cycle()});
  CHECK(s.as == doctest::Approx(5.0));
  CHECK(s.ds == doctest::Approx(-1.0 / 0.6).epsilon(1e-9));

  CycleFiducials doubled = triangle_cycle();
  doubled.hi_max *= 2.0;
  doubled.hi_md *= 2.0;
  auto s2 = features::slope_features({doubled});
  CHECK(s2.as == doctest::Approx(2.0 * s.as));
  CHECK(s2.ds == doctest::Approx(2.0 * s.ds));

  RaisedCosine rc;
  auto s3 = features::slope_features({rc.cycle});
  CHECK(s3.as == doctest::Approx(rc.dz / rc.s).epsilon(0.01));
  CHECK(s3.ds ==
        doctest::Approx(rc.dz / (rc.s - rc.period)).epsilon(0.01));
}

TEST_CASE("differential features on the raised cosine") {
  RaisedCosine rc;
  auto d = features::diff_features({rc.cycle}, rc.series);
  const double dmax_true = rc.dz * kPi / (2.0 * rc.s);
  CHECK(d.hid_max == doctest::Approx(dmax_true).epsilon(0.02));
  REQUIRE(d.slopes_valid);

  // Differential pulse delimited by the window start (monotone rise of d on
  // the left) and the decay-lobe minimum at (s + period) / 2.
  const double fs = 500.0;
  const double t_left = 0.5 / fs;
  const double t_right = 0.5 * (rc.s + rc.period);
  CHECK(d.pwd == doctest::Approx(t_right - t_left).epsilon(0.02));

  // 50% width relative to the pulse's own base.
  const double base = -rc.dz * kPi / (2.0 * (rc.period - rc.s));
  const double level = base + 0.5 * (dmax_true - base);
  const double q = level / dmax_true;
  const double tau1 = rc.s / kPi * std::asin(q);
  const double pwd50_true = (rc.s - tau1) - tau1;
  CHECK(d.pwd50 == doctest::Approx(pwd50_true).epsilon(0.03));
  CHECK(d.pwrd == doctest::Approx(pwd50_true / (t_right - t_left)).epsilon(0.05));
  CHECK(d.asd > 0.0);
  CHECK(d.dsd < 0.0);
}

TEST_CASE("differential features: ramp degenerates, homogeneity holds") {
  // Perfect ramp within the cycle: constant difference.
  Vector v(501);
  for (int k = 0; k <= 500; ++k) v(k) = 3.0 * k / 500.0;
  CycleFiducials c;
  c.t_r = -0.1;
  c.t_min = 0.0;
  c.t_md = 0.4;
  c.t_max = 0.9;
  c.t_min_next = 1.0;
  c.hi_min = 0.0;
  c.hi_md = 1.0;
  c.hi_max = 3.0;
  auto d = features::diff_features({c}, series_of(v));
  CHECK(d.hid_max == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(d.pwd == doctest::Approx(1.0).epsilon(0.01));  // spans the cycle
  CHECK(!d.slopes_valid);

  // Scaling the signal by k scales HId_max and slopes, not widths.
  RaisedCosine rc;
  auto base = features::diff_features({rc.cycle}, rc.series);
  ProcessedSeries scaled = rc.series;
  scaled.values *= 2.5;
  CycleFiducials sc = rc.cycle;
  sc.hi_min *= 2.5;
  sc.hi_md *= 2.5;
  sc.hi_max *= 2.5;
  auto big = features::diff_features({sc}, scaled);
  CHECK(big.hid_max == doctest::Approx(2.5 * base.hid_max).epsilon(1e-9));
  CHECK(big.asd == doctest::Approx(2.5 * base.asd).epsilon(1e-9));
  CHECK(big.dsd == doctest::Approx(2.5 * base.dsd).epsilon(1e-9));
  CHECK(big.pwd == doctest::Approx(base.pwd).epsilon(1e-12));
  CHECK(big.pwd50 == doctest::Approx(base.pwd50).epsilon(1e-9));
}

TEST_CASE("statistical features: symmetry, moments oracle, gaussian kurtosis") {
  Vector sym(3);
  sym << -1.0, 0.0, 1.0;
  auto s = features::stat_features(sym);
  CHECK(s.skew == doctest::Approx(0.0));

  Vector v(4);
  v << 0.0, 0.0, 0.0, 1.0;
  s = features::stat_features(v);
  CHECK(s.sd == doctest::Approx(0.5));
  auto mo = oracles::moments_direct(v);
  CHECK(s.sd == doctest::Approx(mo.sd).epsilon(1e-12));
  CHECK(s.skew == doctest::Approx(mo.skew).epsilon(1e-12));
  CHECK(s.kurt == doctest::Approx(mo.kurt).epsilon(1e-12));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector g(1000000);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = gauss(rng);
  s = features::stat_features(g);
  CHECK(s.kurt == doctest::Approx(3.0).epsilon(0.0167));

  Vector c = Vector::Constant(100, 4.2);
  s = features::stat_features(c);
  CHECK(s.sd == 0.0);
  CHECK(!s.shape_valid);  // ConstantSegment
}

TEST_CASE("entropy: constant series and determinism") {
  Vector c = Vector::Constant(200, 1.0);
  auto e = features::entropy_features(c);
  CHECK(e.defined);
  CHECK(e.sampen == doctest::Approx(0.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(500);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
  auto e1 = features::entropy_features(x);
  auto e2 = features::entropy_features(x);
  CHECK(e1.apen == e2.apen);
  CHECK(e1.sampen == e2.sampen);
}

TEST_CASE("entropy equals the direct-definition oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> len(100, 2000);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = len(rng);
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = u(rng);
    auto mo = oracles::moments_direct(x);
    const double r = 0.2 * mo.sd;
    auto e = features::entropy_features(x, 2, 0.2);
    CHECK(std::abs(e.apen - oracles::apen_direct(x, 2, r)) <= 1e-12);
    const double so = oracles::sampen_direct(x, 2, r);
    REQUIRE(e.defined);
    CHECK(std::abs(e.sampen - so) <= 1e-12);
  }
}

TEST_CASE("noise is more entropic than a sinusoid") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector noise(1000), sinus(1000);
  for (int i = 0; i < 1000; ++i) {
    noise(i) = u(rng);
    sinus(i) = std::sin(2.0 * kPi * 5.0 * i / 500.0);
  }
  auto en = features::entropy_features(noise);
  auto es = features::entropy_features(sinus);
  CHECK(en.sampen > es.sampen);
}

TEST_CASE("heart rate from R times") {
  std::vector<double> peaks = {0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(features::heart_rate(peaks) == doctest::Approx(60.0));
  // Alternating RR 0.5 / 1.0 s: mean RR 0.75 -> 80 bpm.
  std::vector<double> alt = {0.0, 0.5, 1.5, 2.0, 3.0, 3.5, 4.5};
  CHECK(features::heart_rate(alt) == doctest::Approx(80.0));
  CHECK_THROWS_AS(features::heart_rate({1.0}), Error);
}

namespace {

LabeledSegment synthetic_segment(std::uint64_t seed, double hr = 66.0,
                                 double ptt = 0.20) {
  synth::SynthConfig cfg;
  cfg.heart_rate_bpm = hr;
  cfg.ptt_s = ptt;
  cfg.seed = seed;
  auto [rec, truth] = synth::generate(cfg, 16.0);
  auto dm = demod::demodulate(rec, cfg.n_block);
  preprocess::FirSpec fir;
  fir.sample_rate_hz = 500.0;
  const Vector taps = preprocess::design_fir(fir);
  ProcessedSeries ecg = preprocess::apply_fir(dm.ecg_500, taps);

  LabeledSegment seg;
  // Central 8 s window, away from filter edges.
  const Eigen::Index lo = 2000, len = 4000;
  seg.biz = dm.biz_abs;
  seg.biz.values = dm.biz_abs.values.segment(lo, len).eval();
  seg.biz.values.array() -= seg.biz.values.mean();
  seg.ecg = ecg;
  seg.ecg.values = ecg.values.segment(lo, len).eval();
  seg.sbp_mmhg = truth.true_sbp_mmhg.front();
  seg.dbp_mmhg = truth.true_dbp_mmhg.front();
  seg.group_id = "s00/t00";
  return seg;
}

}  // namespace

TEST_CASE("extract_all assembles the canonical vector on synthetic data") {
  LabeledSegment seg = synthetic_segment(9, 66.0, 0.20);
  auto rep = features::extract_all(seg);
  REQUIRE(rep.vector.valid);
  CHECK(rep.valid_cycles >= 5);
  const auto& v = rep.vector.values;
  CHECK(v(feature_index("PTT_min")) == doctest::Approx(0.20).epsilon(0.02));
  CHECK(v(feature_index("HR")) == doctest::Approx(66.0).epsilon(0.01));
  // Structural identities on the extracted vector.
  CHECK(v(feature_index("PW")) ==
        doctest::Approx(v(feature_index("SW")) + v(feature_index("DW")))
            .epsilon(1e-9));
  CHECK(v(feature_index("PP")) ==
        doctest::Approx(v(feature_index("HI_max")) - v(feature_index("HI_min")))
            .epsilon(1e-9));
  CHECK(v(feature_index("PWR25")) >= v(feature_index("PWR50")));
  CHECK(v(feature_index("PWR50")) >= v(feature_index("PWR75")));
  CHECK(v(feature_index("PWR75")) >= v(feature_index("PWR90")));
  CHECK(v(feature_index("AS")) > 0.0);
  CHECK(v(feature_index("DS")) < 0.0);
}

TEST_CASE("extract_all flags a segment with no cycles") {
  LabeledSegment seg;
  seg.biz = series_of(Vector::Zero(4000));
  seg.ecg = series_of(Vector::Zero(4000));
  seg.ecg.kind = SeriesKind::Ecg;
  auto rep = features::extract_all(seg);
  CHECK(!rep.vector.valid);
  REQUIRE(!rep.vector.reasons.empty());
  CHECK(rep.vector.reasons.front().rfind("NoValidCycles", 0) == 0);
}

TEST_CASE("extraction is stateless: order does not matter") {
  LabeledSegment a = synthetic_segment(100, 60.0, 0.18);
  LabeledSegment b = synthetic_segment(200, 80.0, 0.25);
  auto a1 = features::extract_all(a);
  auto b1 = features::extract_all(b);
  auto b2 = features::extract_all(b);
  auto a2 = features::extract_all(a);
  CHECK(a1.vector.values == a2.vector.values);
  CHECK(b1.vector.values == b2.vector.values);
}

TEST_CASE("amplitude scaling: the documented feature scaling map") {
  LabeledSegment seg = synthetic_segment(31, 72.0, 0.22);
  LabeledSegment scaled = seg;
  const double k = 4.0;
  scaled.biz.values *= k;
  auto base = features::extract_all(seg);
  auto big = features::extract_all(scaled);
  REQUIRE(base.vector.valid);
  REQUIRE(big.vector.valid);

  const char* scale_with_k[] = {"HI_max", "HI_min", "HI_MD", "PP",
                                "AS",     "DS",     "HId_max", "SD"};
  for (const char* name : scale_with_k) {
    CHECK(big.vector.values(feature_index(name)) ==
          doctest::Approx(k * base.vector.values(feature_index(name)))
              .epsilon(1e-9));
  }
  const char* unchanged[] = {"PTT_max", "PTT_min", "PAT",   "PW",    "SW",
                             "DW",      "PW50",    "PWR25", "PWR50", "PWR75",
                             "PWR90",   "HIR_max", "HIR_MD", "Skew",  "Kurt",
                             "ApEn",    "SampEn",  "HR",    "PWd",   "PWd50",
                             "PWRd"};
  for (const char* name : unchanged) {
    CHECK(big.vector.values(feature_index(name)) ==
          doctest::Approx(base.vector.values(feature_index(name)))
              .epsilon(1e-9));
  }
}

TEST_CASE("time-unit coherence: widths scale, slopes inverse-scale") {
  RaisedCosine rc;
  auto w_s = features::width_features({rc.cycle}, rc.series);
  auto s_s = features::slope_features({rc.cycle});

  // Same data with time measured in milliseconds: rate 0.5 samples/ms.
  ProcessedSeries ms = rc.series;
  ms.sample_rate_hz = 0.5;
  CycleFiducials c = rc.cycle;
  c.t_r *= 1000.0;
  c.t_min *= 1000.0;
  c.t_md *= 1000.0;
  c.t_max *= 1000.0;
  c.t_min_next *= 1000.0;
  auto w_ms = features::width_features({c}, ms);
  auto s_ms = features::slope_features({c});
  CHECK(w_ms.pw == doctest::Approx(1000.0 * w_s.pw).epsilon(1e-9));
  CHECK(w_ms.sw50 == doctest::Approx(1000.0 * w_s.sw50).epsilon(1e-9));
  CHECK(w_ms.pwr50 == doctest::Approx(w_s.pwr50).epsilon(1e-9));
  CHECK(s_ms.as == doctest::Approx(s_s.as / 1000.0).epsilon(1e-9));
  CHECK(s_ms.ds == doctest::Approx(s_s.ds / 1000.0).epsilon(1e-9));
}
