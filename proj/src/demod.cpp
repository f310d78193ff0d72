#include "biozbp/demod.hpp"

#include "biozbp/threading.hpp"

#include <cmath>
#include <numbers>

namespace biozbp::demod {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_phase(double phi) {
  phi = std::remainder(phi, 2.0 * kPi);
  if (phi <= -kPi) phi += 2.0 * kPi;
  return phi;
}

std::string demod_log_entry(int n_block, double f_exc, double fs) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "demod(n_block=%d,f_exc=%g,fs=%g)", n_block,
                f_exc, fs);
  return buf;
}

}  // namespace

BlockFitter::BlockFitter(int n_block, double f_exc_hz, double fs_hz)
    : n_block_(n_block) {
  if (!(f_exc_hz > 0.0) || !(fs_hz > 0.0) || f_exc_hz >= fs_hz / 2.0) {
    throw Error(ErrorCode::AliasedExcitation, "demod",
                "excitation frequency must lie below fs/2");
  }
  const double periods = f_exc_hz * n_block / fs_hz;
  if (n_block < 4 || periods < 1.0 || fs_hz / f_exc_hz < 4.0) {
    throw Error(ErrorCode::BlockTooShort, "demod",
                "block must span >= 1 excitation period at >= 4 samples/period");
  }

  Eigen::MatrixX3d basis(n_block, 3);
  const double w = 2.0 * kPi * f_exc_hz / fs_hz;
  for (int i = 0; i < n_block; ++i) {
    basis(i, 0) = std::sin(w * i);
    basis(i, 1) = std::cos(w * i);
    basis(i, 2) = 1.0;
  }
  // Rows of pinv(basis); the 3x3 Gram is well conditioned for any phase.
  Eigen::Matrix3d gram = basis.transpose() * basis;
  Eigen::Matrix3d gram_inv = gram.ldlt().solve(Eigen::Matrix3d::Identity());
  Eigen::MatrixXd pinv = gram_inv * basis.transpose();
  pinv_sin_ = pinv.row(0);
  pinv_cos_ = pinv.row(1);
  pinv_const_ = pinv.row(2);
}

BlockEstimate BlockFitter::estimate(ConstVectorRef vs_block,
                                    ConstVectorRef vr_block,
                                    int block_index) const {
  if (vs_block.size() != n_block_ || vr_block.size() != n_block_) {
    throw Error(ErrorCode::BlockTooShort, "demod",
                "block length does not match fitter configuration");
  }
  auto fit_channel = [&](ConstVectorRef x, double& amp, double& phase) {
    const double a = pinv_sin_.dot(x);   // sin coefficient
    const double b = pinv_cos_.dot(x);   // cos coefficient
    amp = std::hypot(a, b);
    // a*sin(wt) + b*cos(wt) = A*sin(wt + phi), phi = atan2(b, a)
    phase = wrap_phase(std::atan2(b, a));
  };

  BlockEstimate est;
  est.block_index = block_index;
  fit_channel(vs_block, est.a_s, est.phi_s);
  fit_channel(vr_block, est.a_r, est.phi_r);
  if (!(est.a_s > 0.0) || !(est.a_r > 0.0)) {
    throw Error(ErrorCode::DegenerateBlock, "demod",
                "block has no excitation-frequency content");
  }
  return est;
}

BlockEstimate estimate_block(ConstVectorRef vs_block, ConstVectorRef vr_block,
                             double f_exc_hz, double fs_hz) {
  BlockFitter fitter(static_cast<int>(vs_block.size()), f_exc_hz, fs_hz);
  return fitter.estimate(vs_block, vr_block);
}

ComplexImpedance impedance_from_block(const BlockEstimate& b, double r0_ohm) {
  if (!(b.a_r > 0.0) || !(r0_ohm > 0.0)) {
    throw Error(ErrorCode::DegenerateBlock, "demod",
                "impedance requires a_r > 0 and r0 > 0");
  }
  const double ratio = b.a_s / b.a_r;
  const double dphi = b.phi_s - b.phi_r;
  ComplexImpedance z;
  z.real_ohm = (ratio * std::cos(dphi) - 1.0) * r0_ohm;
  z.imag_ohm = ratio * std::sin(dphi) * r0_ohm;
  z.abs_ohm = std::hypot(z.real_ohm, z.imag_ohm);
  return z;
}

DemodResult demodulate(const RawRecording& rec, int n_block) {
  rec.validate();
  if (n_block < 4) {
    throw Error(ErrorCode::BlockTooShort, "demod", "n_block must be >= 4");
  }
  const Eigen::Index n = rec.size();
  const Eigen::Index n_out = n / n_block;
  if (n_out < 1) {
    throw Error(ErrorCode::BlockTooShort, "demod",
                "recording shorter than one block");
  }

  BlockFitter fitter(n_block, rec.excitation_freq_hz, rec.sample_rate_hz);
  const double out_rate = rec.sample_rate_hz / n_block;

  DemodResult out;
  out.dropped_trailing_samples = static_cast<int>(n - n_out * n_block);
  out.biz_abs.values.resize(n_out);
  out.biz_real.values.resize(n_out);
  out.biz_imag.values.resize(n_out);
  out.ecg_500.values.resize(n_out);

  parallel_for(static_cast<std::size_t>(n_out), [&](std::size_t k) {
    const Eigen::Index lo = static_cast<Eigen::Index>(k) * n_block;
    BlockEstimate est = fitter.estimate(rec.vs_samples.segment(lo, n_block),
                                        rec.vr_samples.segment(lo, n_block),
                                        static_cast<int>(k));
    ComplexImpedance z = impedance_from_block(est, rec.r0_ohm);
    out.biz_abs.values(k) = z.abs_ohm;
    out.biz_real.values(k) = z.real_ohm;
    out.biz_imag.values(k) = z.imag_ohm;
    out.ecg_500.values(k) = rec.ecg_samples.segment(lo, n_block).mean();
  });

  const std::string log =
      demod_log_entry(n_block, rec.excitation_freq_hz, rec.sample_rate_hz);
  auto finish = [&](ProcessedSeries& s, SeriesKind kind) {
    s.sample_rate_hz = out_rate;
    s.kind = kind;
    s.processing_log.push_back(log);
  };
  finish(out.biz_abs, SeriesKind::BiozAbs);
  finish(out.biz_real, SeriesKind::BiozReal);
  finish(out.biz_imag, SeriesKind::BiozImag);
  finish(out.ecg_500, SeriesKind::Ecg);
  return out;
}

}  // namespace biozbp::demod
