#pragma once

#include "biozbp/types.hpp"

namespace biozbp::preprocess {

enum class FirWindow { Hamming };

struct FirSpec {
  int order = 1000;  // even, taps = order + 1
  double low_hz = 0.5;
  double high_hz = 10.0;
  FirWindow window = FirWindow::Hamming;
  double sample_rate_hz = 500.0;
};

struct SgSpec {
  int poly_order = 3;
  Eigen::Index window_len = 10001;  // odd
};

enum class SgMode { Smooth, Detrend };

struct WindowSpec {
  double window_s = 8.0;
  double overlap_fraction = 0.75;
};

// Linear-phase band-pass: difference of two unit-DC-gain windowed-sinc
// low-passes, which pins an exact zero at DC. Taps are symmetric bit-exactly.
Vector design_fir(const FirSpec& spec);

// Zero-phase application: symmetric taps, group delay compensated by
// construction, reflect padding at the edges. Length is preserved.
ProcessedSeries apply_fir(const ProcessedSeries& series, ConstVectorRef taps);

// Savitzky-Golay local polynomial fit. SMOOTH returns the fitted series,
// DETREND returns series minus fit. Edge windows shrink symmetrically; output
// length always equals input length.
ProcessedSeries apply_sg(const ProcessedSeries& series, const SgSpec& spec,
                         SgMode mode);

// Sliding-window segmentation; every segment carries the trial's label pair.
std::vector<LabeledSegment> segment(const ProcessedSeries& biz,
                                    const ProcessedSeries& ecg,
                                    double sbp_mmhg, double dbp_mmhg,
                                    const WindowSpec& spec,
                                    const std::string& group_id = "");

// Full convolution (length nx + nh - 1) via FFT; shared by FIR and SG.
Vector fft_convolve(ConstVectorRef x, ConstVectorRef h);

}  // namespace biozbp::preprocess
