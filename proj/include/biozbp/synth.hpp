#pragma once

#include "biozbp/types.hpp"

#include <cstdint>

namespace biozbp::synth {

// Affine PTT/HR -> pressure law with seeded gaussian residuals.
struct BpLaw {
  double intercept_mmhg = 150.0;
  double ptt_slope_mmhg_per_s = 100.0;  // subtracted: BP falls as PTT grows
  double hr_slope_mmhg_per_bpm = 0.2;
  double noise_sd_mmhg = 0.0;

  double mean(double ptt_s, double hr_bpm) const {
    return intercept_mmhg - ptt_slope_mmhg_per_s * ptt_s +
           hr_slope_mmhg_per_bpm * hr_bpm;
  }
};

struct SynthConfig {
  double heart_rate_bpm = 72.0;
  double z_baseline_ohm = 50.0;
  double delta_z_ohm = 32.0;        // pulsatile peak-to-trough excursion
  double ptt_s = 0.20;              // R peak -> BIOZ minimum delay
  double systolic_fraction = 0.30;  // fraction of the cycle spent rising
  double respiration_amp_ohm = 0.0;
  double respiration_freq_hz = 0.25;
  double noise_snr_db = 0.0;  // carrier-band SNR; noise_enabled gates it
  bool noise_enabled = false;
  BpLaw sbp_law;                        // SBP = a - b*PTT + c*HR + N(0, sd^2)
  BpLaw dbp_law{90.0, 55.0, 0.1, 0.0};  // kept strictly below sbp_law
  std::uint64_t seed = 1;

  // Acquisition parameters mirrored into the RawRecording.
  double sample_rate_hz = 100000.0;
  double excitation_freq_hz = 10000.0;
  double r0_ohm = 10000.0;
  double vs_amplitude_v = 0.5;  // 1 Vpp excitation
  int n_block = 200;            // impedance waveform is held constant per block
  std::string subject_id = "synth";
  std::string trial_id = "t00";

  void validate() const;
};

// Exact fiducials and the clean impedance waveform backing a recording.
struct GroundTruth {
  std::vector<double> r_peak_times_s;
  std::vector<double> biz_min_times_s;
  std::vector<double> biz_max_times_s;
  std::vector<double> biz_md_times_s;
  std::vector<double> true_sbp_mmhg;  // one entry per cycle (trial-constant)
  std::vector<double> true_dbp_mmhg;
  Vector clean_impedance;  // |Z| at sample_rate / n_block, ohms
  double impedance_rate_hz = 500.0;
};

// Piecewise raised-cosine pulse height above the cycle minimum, as a function
// of the within-cycle phase u in [0, 1). Rises over [0, s), decays over [s, 1).
double pulse_height(double u, double systolic_fraction, double delta_z);

std::pair<RawRecording, GroundTruth> generate(const SynthConfig& config,
                                              double duration_s);

// Applies the configured affine laws plus seeded gaussian noise row-wise.
std::vector<std::pair<double, double>> bp_labels(
    const SynthConfig& config, const std::vector<double>& ptt_s,
    const std::vector<double>& hr_bpm);

}  // namespace biozbp::synth
