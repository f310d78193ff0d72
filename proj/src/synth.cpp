#include "biozbp/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace biozbp::synth {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

// sin(w*i + phi0) for i = 0..n-1 via complex rotation, renormalized
// periodically to stop amplitude drift.
void fill_carrier(Vector& out, double w, double phi0) {
  const Eigen::Index n = out.size();
  double c = std::cos(phi0), s = std::sin(phi0);
  const double dc = std::cos(w), ds = std::sin(w);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = s;
    const double c2 = c * dc - s * ds;
    const double s2 = s * dc + c * ds;
    c = c2;
    s = s2;
    if ((i & 0xFFF) == 0xFFF) {
      const double norm = std::hypot(c, s);
      c /= norm;
      s /= norm;
    }
  }
}

void add_gaussian_bump(Vector& ecg, double center_s, double amp, double sd_s,
                       double fs) {
  const double half = 4.0 * sd_s;
  Eigen::Index lo = static_cast<Eigen::Index>(std::ceil((center_s - half) * fs));
  Eigen::Index hi = static_cast<Eigen::Index>(std::floor((center_s + half) * fs));
  lo = std::max<Eigen::Index>(lo, 0);
  hi = std::min<Eigen::Index>(hi, ecg.size() - 1);
  const double inv_2sd2 = 1.0 / (2.0 * sd_s * sd_s);
  for (Eigen::Index i = lo; i <= hi; ++i) {
    const double dt = i / fs - center_s;
    ecg(i) += amp * std::exp(-dt * dt * inv_2sd2);
  }
}

void add_noise(Vector& x, double snr_db, std::mt19937_64& rng) {
  const double rms = std::sqrt(x.squaredNorm() / std::max<Eigen::Index>(x.size(), 1));
  const double sigma = rms * std::pow(10.0, -snr_db / 20.0);
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += dist(rng);
}

}  // namespace

void SynthConfig::validate() const {
  const bool ok = delta_z_ohm >= 0.0 && z_baseline_ohm > 0.0 &&
                  systolic_fraction > 0.0 && systolic_fraction < 1.0 &&
                  heart_rate_bpm >= 30.0 && heart_rate_bpm <= 220.0 &&
                  ptt_s > 0.0 && sample_rate_hz > 0.0 &&
                  excitation_freq_hz > 0.0 &&
                  excitation_freq_hz < sample_rate_hz / 2.0 && r0_ohm > 0.0 &&
                  vs_amplitude_v > 0.0 && n_block >= 4 &&
                  respiration_amp_ohm >= 0.0 && respiration_freq_hz > 0.0;
  if (!ok) {
    throw Error(ErrorCode::InvalidConfig, "synthgen",
                "synthesis config violates its invariants");
  }
}

double pulse_height(double u, double systolic_fraction, double delta_z) {
  u -= std::floor(u);
  const double s = systolic_fraction;
  if (u < s) {
    return delta_z * 0.5 * (1.0 - std::cos(kPi * u / s));
  }
  return delta_z * 0.5 * (1.0 + std::cos(kPi * (u - s) / (1.0 - s)));
}

std::pair<RawRecording, GroundTruth> generate(const SynthConfig& config,
                                              double duration_s) {
  config.validate();
  const double min_duration = 10.0 / config.heart_rate_bpm * 60.0;
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "synthgen", "duration must be positive");
  }
  (void)min_duration;  // ~10 beats recommended, shorter runs are allowed

  const double fs = config.sample_rate_hz;
  const double out_rate = fs / config.n_block;
  const Eigen::Index n_out =
      static_cast<Eigen::Index>(std::llround(duration_s * out_rate));
  const Eigen::Index n_raw = n_out * config.n_block;
  if (n_out < 1) {
    throw Error(ErrorCode::InvalidConfig, "synthgen", "duration too short");
  }

  const double cycle_s = 60.0 / config.heart_rate_bpm;
  const double t_first_r = 0.25;  // keep the first R wave fully inside
  const double t_first_min = t_first_r + config.ptt_s;

  // Clean impedance on the demodulated grid; constant within each raw block.
  GroundTruth truth;
  truth.impedance_rate_hz = out_rate;
  truth.clean_impedance.resize(n_out);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    const double t = k / out_rate;
    double z = config.z_baseline_ohm +
               pulse_height((t - t_first_min) / cycle_s,
                            config.systolic_fraction, config.delta_z_ohm);
    if (config.respiration_amp_ohm > 0.0) {
      z += config.respiration_amp_ohm *
           std::sin(2.0 * kPi * config.respiration_freq_hz * t);
    }
    truth.clean_impedance(k) = z;
  }

  // Fiducial ground truth for every cycle whose minimum lies inside.
  const double real_dur = n_out / out_rate;
  for (int i = 0;; ++i) {
    const double t_min = t_first_min + i * cycle_s;
    if (t_min > real_dur) break;
    const double t_r = t_min - config.ptt_s;
    if (t_r >= 0.0 && t_r <= real_dur) truth.r_peak_times_s.push_back(t_r);
    truth.biz_min_times_s.push_back(t_min);
    const double t_max = t_min + config.systolic_fraction * cycle_s;
    const double t_md = t_min + 0.5 * config.systolic_fraction * cycle_s;
    if (t_max <= real_dur) truth.biz_max_times_s.push_back(t_max);
    if (t_md <= real_dur) truth.biz_md_times_s.push_back(t_md);
  }

  // Labels for the trial: one pair, repeated per cycle.
  const auto labels = bp_labels(config, {config.ptt_s}, {config.heart_rate_bpm});
  truth.true_sbp_mmhg.assign(truth.biz_min_times_s.size(), labels[0].first);
  truth.true_dbp_mmhg.assign(truth.biz_min_times_s.size(), labels[0].second);

  RawRecording rec;
  rec.sample_rate_hz = fs;
  rec.excitation_freq_hz = config.excitation_freq_hz;
  rec.r0_ohm = config.r0_ohm;
  rec.subject_id = config.subject_id;
  rec.trial_id = config.trial_id;
  rec.duration_s = n_raw / fs;

  // Carrier channels. vr is vs scaled by the per-block voltage-divider ratio,
  // so block-wise demodulation recovers the held impedance exactly.
  auto rng_phase = derived_rng(config.seed, 0x9a5e);
  const double phi0 =
      std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng_phase);
  rec.vs_samples.resize(n_raw);
  fill_carrier(rec.vs_samples, 2.0 * kPi * config.excitation_freq_hz / fs, phi0);
  rec.vs_samples *= config.vs_amplitude_v;
  rec.vr_samples.resize(n_raw);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    const double ratio = truth.clean_impedance(k) / config.r0_ohm + 1.0;
    rec.vr_samples.segment(k * config.n_block, config.n_block) =
        rec.vs_samples.segment(k * config.n_block, config.n_block) / ratio;
  }

  // ECG: dominant gaussian R spikes over small P/T bumps.
  rec.ecg_samples = Vector::Zero(n_raw);
  for (int i = 0;; ++i) {
    const double t_r = t_first_r + i * cycle_s;
    if (t_r > real_dur + 0.5) break;
    add_gaussian_bump(rec.ecg_samples, t_r, 1.0, 0.008, fs);
    add_gaussian_bump(rec.ecg_samples, t_r - 0.16, 0.12, 0.020, fs);
    add_gaussian_bump(rec.ecg_samples, t_r + 0.26, 0.25, 0.045, fs);
  }

  if (config.noise_enabled) {
    auto rng_noise = derived_rng(config.seed, 0x1c37);
    add_noise(rec.vs_samples, config.noise_snr_db, rng_noise);
    add_noise(rec.vr_samples, config.noise_snr_db, rng_noise);
    add_noise(rec.ecg_samples, config.noise_snr_db, rng_noise);
  }
  return {std::move(rec), std::move(truth)};
}

std::vector<std::pair<double, double>> bp_labels(
    const SynthConfig& config, const std::vector<double>& ptt_s,
    const std::vector<double>& hr_bpm) {
  if (ptt_s.size() != hr_bpm.size()) {
    throw Error(ErrorCode::LengthMismatch, "synthgen",
                "ptt and hr arrays differ in length");
  }
  auto rng = derived_rng(config.seed, 0xb91a);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> out;
  out.reserve(ptt_s.size());
  for (std::size_t i = 0; i < ptt_s.size(); ++i) {
    if (!(ptt_s[i] > 0.0) || !(hr_bpm[i] > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "synthgen",
                  "PTT and HR must be positive");
    }
    const double sbp = config.sbp_law.mean(ptt_s[i], hr_bpm[i]) +
                       config.sbp_law.noise_sd_mmhg * unit(rng);
    const double dbp = config.dbp_law.mean(ptt_s[i], hr_bpm[i]) +
                       config.dbp_law.noise_sd_mmhg * unit(rng);
    out.emplace_back(sbp, dbp);
  }
  return out;
}

}  // namespace biozbp::synth
