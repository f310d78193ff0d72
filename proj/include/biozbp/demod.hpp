#pragma once

#include "biozbp/types.hpp"

namespace biozbp::demod {

// Amplitude/phase of the two carrier channels over one block.
struct BlockEstimate {
  double a_s = 0.0;    // volts
  double phi_s = 0.0;  // radians in (-pi, pi]
  double a_r = 0.0;    // volts
  double phi_r = 0.0;  // radians in (-pi, pi]
  int block_index = 0;
};

struct ComplexImpedance {
  double real_ohm = 0.0;
  double imag_ohm = 0.0;
  double abs_ohm = 0.0;
};

struct DemodResult {
  ProcessedSeries biz_abs;
  ProcessedSeries biz_real;
  ProcessedSeries biz_imag;
  ProcessedSeries ecg_500;
  int dropped_trailing_samples = 0;
};

// Precomputed sin/cos/constant basis for fixed (n_block, f_exc/fs). Fitting a
// block is then three dot products per channel against the pseudoinverse rows.
class BlockFitter {
 public:
  BlockFitter(int n_block, double f_exc_hz, double fs_hz);

  int block_size() const { return n_block_; }

  // Least-squares fit of c + A*sin(2*pi*f*t + phi) over one block of each
  // channel. Times are block-local: t_i = i / fs.
  BlockEstimate estimate(ConstVectorRef vs_block, ConstVectorRef vr_block,
                         int block_index = 0) const;

 private:
  int n_block_;
  Vector pinv_sin_;    // row of the basis pseudoinverse giving the sin coeff
  Vector pinv_cos_;    // ... cos coeff
  Vector pinv_const_;  // ... DC coeff (unused by the estimate, kept for tests)
};

BlockEstimate estimate_block(ConstVectorRef vs_block, ConstVectorRef vr_block,
                             double f_exc_hz, double fs_hz);

// Measurement relation: Z = (a_s/a_r * exp(j*(phi_s - phi_r)) - 1) * r0.
ComplexImpedance impedance_from_block(const BlockEstimate& b, double r0_ohm);

// Converts a raw recording into 500 Hz-class outputs: one impedance sample
// and one ECG mean per n_block raw samples. A trailing partial block is
// dropped (reported via dropped_trailing_samples).
DemodResult demodulate(const RawRecording& rec, int n_block = 200);

}  // namespace biozbp::demod
