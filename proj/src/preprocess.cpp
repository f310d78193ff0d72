#include "biozbp/preprocess.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>

namespace biozbp::preprocess {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Hamming-windowed sinc low-pass normalized to unit DC gain. Computed on the
// left half and mirrored so taps[k] == taps[order-k] holds bit-exactly.
Vector windowed_lowpass(int order, double fc, double fs) {
  const int m = order / 2;
  Vector taps(order + 1);
  const double bw = 2.0 * fc / fs;
  for (int k = 0; k <= m; ++k) {
    const double d = static_cast<double>(k - m);
    const double w = 0.54 - 0.46 * std::cos(2.0 * kPi * k / order);
    taps(k) = bw * sinc(bw * d) * w;
    taps(order - k) = taps(k);
  }
  double sum = taps(m);
  for (int k = 0; k < m; ++k) sum += 2.0 * taps(k);
  taps /= sum;
  return taps;
}

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Power sums S[r] = sum over d = -h..h of d^r, for r = 0..rmax.
std::vector<double> power_sums(Eigen::Index h, int rmax) {
  std::vector<double> s(rmax + 1, 0.0);
  s[0] = static_cast<double>(2 * h + 1);
  for (Eigen::Index d = 1; d <= h; ++d) {
    const double dd = static_cast<double>(d);
    double p = 1.0;
    for (int r = 1; r <= rmax; ++r) {
      p *= dd;
      if (r % 2 == 0) s[r] += 2.0 * p;
    }
  }
  return s;
}

// Row 0 of the inverse Gram for the offset-normalized power basis (d/h)^j on
// the symmetric window -h..h. c0 = row . m gives the LS fit value at center.
Eigen::VectorXd center_row_from_sums(const std::vector<double>& sums,
                                     Eigen::Index h, int p) {
  const double hs = static_cast<double>(std::max<Eigen::Index>(h, 1));
  Eigen::MatrixXd g(p + 1, p + 1);
  for (int a = 0; a <= p; ++a) {
    for (int b = a; b <= p; ++b) {
      double scale = 1.0;
      for (int t = 0; t < a + b; ++t) scale *= hs;
      const double v = sums[a + b] / scale;
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(p + 1);
  e0(0) = 1.0;
  return g.ldlt().solve(e0);
}

// Full-window SG center weights, offsets -h..h.
Vector sg_center_weights(Eigen::Index h, int p) {
  Eigen::VectorXd row = center_row_from_sums(power_sums(h, 2 * p), h, p);
  Vector w(2 * h + 1);
  const double hs = static_cast<double>(std::max<Eigen::Index>(h, 1));
  for (Eigen::Index d = -h; d <= h; ++d) {
    const double u = static_cast<double>(d) / hs;
    double acc = 0.0, up = 1.0;
    for (int j = 0; j <= p; ++j) {
      acc += row(j) * up;
      up *= u;
    }
    w(d + h) = acc;
  }
  return w;
}

// Smoothed values for positions 0..count-1, where position i fits over the
// shrunken symmetric window [0, 2i]. Centered moments are carried from one
// position to the next (binomial recentering), so the whole edge is O(count).
void sg_left_edge(ConstVectorRef x, int p, Eigen::Index count, Vector& out) {
  if (count <= 0) return;
  out(0) = x(0);
  std::vector<double> mom(p + 1, 0.0), tmp(p + 1, 0.0);
  mom[0] = x(0);
  std::vector<double> binom((p + 1) * (p + 1), 0.0);
  for (int j = 0; j <= p; ++j) {
    binom[j * (p + 1)] = 1.0;
    for (int r = 1; r <= j; ++r) {
      binom[j * (p + 1) + r] = binom[(j - 1) * (p + 1) + r - 1] +
                               ((r <= j - 1) ? binom[(j - 1) * (p + 1) + r] : 0.0);
    }
  }
  std::vector<double> sums(2 * p + 1, 0.0);
  sums[0] = 1.0;  // window {0}

  for (Eigen::Index i = 1; i < count; ++i) {
    // Recenter by +1: (t - i)^j = sum_r C(j,r) (t - (i-1))^r (-1)^{j-r}.
    for (int j = p; j >= 0; --j) {
      double acc = 0.0;
      for (int r = 0; r <= j; ++r) {
        const double sign = ((j - r) % 2 == 0) ? 1.0 : -1.0;
        acc += binom[j * (p + 1) + r] * sign * mom[r];
      }
      tmp[j] = acc;
    }
    mom.swap(tmp);
    // Window grows on the right: samples at offsets i-1 and i enter.
    for (Eigen::Index t = 2 * i - 1; t <= 2 * i; ++t) {
      const double off = static_cast<double>(t - i);
      const double y = x(t);
      double op = 1.0;
      for (int j = 0; j <= p; ++j) {
        mom[j] += op * y;
        op *= off;
      }
    }
    // Power sums for half-width h = i.
    const double hd = static_cast<double>(i);
    sums[0] += 2.0;
    double hp = 1.0;
    for (int r = 1; r <= 2 * p; ++r) {
      hp *= hd;
      if (r % 2 == 0) sums[r] += 2.0 * hp;
    }

    const Eigen::Index h = i;
    const int p_eff = static_cast<int>(std::min<Eigen::Index>(p, 2 * h));
    Eigen::VectorXd row = center_row_from_sums(sums, h, p_eff);
    double value = 0.0, scale = 1.0;
    for (int j = 0; j <= p_eff; ++j) {
      value += row(j) * mom[j] / scale;
      scale *= hd;
    }
    out(i) = value;
  }
}

std::string fir_log_entry(Eigen::Index taps) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "fir_bandpass(taps=%lld,zero_phase=reflect)",
                static_cast<long long>(taps));
  return buf;
}

}  // namespace

Vector fft_convolve(ConstVectorRef x, ConstVectorRef h) {
  const Eigen::Index nx = x.size();
  const Eigen::Index nh = h.size();
  const Eigen::Index nfull = nx + nh - 1;
  const Eigen::Index nfft = next_pow2(nfull);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fx(nfft), fh(nfft);
  std::vector<double> bx(nfft, 0.0), bh(nfft, 0.0);
  Eigen::Map<Vector>(bx.data(), nx) = x;
  Eigen::Map<Vector>(bh.data(), nh) = h;
  fft.fwd(fx, bx);
  fft.fwd(fh, bh);
  for (Eigen::Index i = 0; i < nfft; ++i) fx[i] *= fh[i];
  std::vector<double> conv(nfft);
  fft.inv(conv, fx);
  return Eigen::Map<Vector>(conv.data(), nfull);
}

Vector design_fir(const FirSpec& spec) {
  const double nyq = spec.sample_rate_hz / 2.0;
  if (!(spec.sample_rate_hz > 0.0) || !(spec.low_hz > 0.0) ||
      !(spec.low_hz < spec.high_hz) || !(spec.high_hz < nyq)) {
    throw Error(ErrorCode::InvalidBand, "preprocess",
                "band edges must satisfy 0 < low < high < fs/2");
  }
  if (spec.order < 2 || spec.order % 2 != 0) {
    throw Error(ErrorCode::InvalidBand, "preprocess",
                "FIR order must be even and >= 2");
  }
  Vector high = windowed_lowpass(spec.order, spec.high_hz, spec.sample_rate_hz);
  Vector low = windowed_lowpass(spec.order, spec.low_hz, spec.sample_rate_hz);
  return high - low;  // both have unit DC gain, so the DC gain is exactly 0
}

ProcessedSeries apply_fir(const ProcessedSeries& series, ConstVectorRef taps) {
  const Eigen::Index n = series.size();
  const Eigen::Index nt = taps.size();
  if (nt < 3 || nt % 2 != 1) {
    throw Error(ErrorCode::InvalidBand, "preprocess",
                "tap count must be odd (even order)");
  }
  const Eigen::Index m = (nt - 1) / 2;
  if (n <= nt) {
    throw Error(ErrorCode::SeriesTooShort, "preprocess",
                "series must be longer than the filter");
  }

  // Reflect padding (no edge repeat), then align by the known group delay m.
  Vector padded(n + 2 * m);
  for (Eigen::Index i = 0; i < n + 2 * m; ++i) {
    Eigen::Index j = i - m;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    padded(i) = series.values(j);
  }
  Vector conv = fft_convolve(padded, taps);

  ProcessedSeries out = series;
  out.values = conv.segment(2 * m, n);
  out.processing_log.push_back(fir_log_entry(nt));
  return out;
}

ProcessedSeries apply_sg(const ProcessedSeries& series, const SgSpec& spec,
                         SgMode mode) {
  if (spec.window_len < 1 || spec.window_len % 2 != 1 || spec.poly_order < 0 ||
      spec.poly_order >= spec.window_len || spec.poly_order > 10) {
    throw Error(ErrorCode::InvalidSpec, "preprocess",
                "SG window must be odd and poly_order in [0, min(10, window))");
  }
  const Eigen::Index n = series.size();
  if (n < 1) {
    throw Error(ErrorCode::InvalidSpec, "preprocess", "empty series");
  }
  const Eigen::Index big_h = (spec.window_len - 1) / 2;

  Vector smooth(n);
  if (n >= spec.window_len) {
    // Interior: fixed-width convolution with the center weights.
    Vector w = sg_center_weights(big_h, spec.poly_order);
    Vector conv = fft_convolve(series.values, w);
    smooth.segment(big_h, n - 2 * big_h) = conv.segment(2 * big_h, n - 2 * big_h);
    const Eigen::Index edge = big_h;
    Vector left(edge), right(edge);
    sg_left_edge(series.values, spec.poly_order, edge, left);
    Vector rev = series.values.reverse();
    sg_left_edge(rev, spec.poly_order, edge, right);
    for (Eigen::Index i = 0; i < edge; ++i) {
      smooth(i) = left(i);
      smooth(n - 1 - i) = right(i);
    }
  } else {
    // Whole series uses shrunken windows: growing from the left end up to the
    // middle, then shrinking again toward the right end.
    const Eigen::Index half = (n + 1) / 2;
    Vector left(half), right(half);
    sg_left_edge(series.values, spec.poly_order, half, left);
    Vector rev = series.values.reverse();
    sg_left_edge(rev, spec.poly_order, half, right);
    for (Eigen::Index i = 0; i < half; ++i) smooth(i) = left(i);
    for (Eigen::Index i = 0; i < half; ++i) smooth(n - 1 - i) = right(i);
  }

  ProcessedSeries out = series;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "sg_%s(order=%d,window=%lld)",
                mode == SgMode::Smooth ? "smooth" : "detrend", spec.poly_order,
                static_cast<long long>(spec.window_len));
  out.processing_log.push_back(buf);
  if (mode == SgMode::Smooth) {
    out.values = smooth;
  } else {
    out.values = series.values - smooth;
  }
  return out;
}

std::vector<LabeledSegment> segment(const ProcessedSeries& biz,
                                    const ProcessedSeries& ecg,
                                    double sbp_mmhg, double dbp_mmhg,
                                    const WindowSpec& spec,
                                    const std::string& group_id) {
  if (biz.sample_rate_hz != ecg.sample_rate_hz || biz.size() != ecg.size()) {
    throw Error(ErrorCode::LengthMismatch, "preprocess",
                "BIOZ and ECG series must be aligned and equal-rate");
  }
  if (!(spec.window_s > 0.0) || spec.overlap_fraction < 0.0 ||
      spec.overlap_fraction >= 1.0) {
    throw Error(ErrorCode::InvalidSpec, "preprocess",
                "window must be positive with overlap in [0,1)");
  }
  if (!(sbp_mmhg > dbp_mmhg) || !(dbp_mmhg > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "preprocess",
                "labels must satisfy sbp > dbp > 0");
  }
  const double rate = biz.sample_rate_hz;
  const Eigen::Index win =
      static_cast<Eigen::Index>(std::llround(spec.window_s * rate));
  Eigen::Index hop = static_cast<Eigen::Index>(
      std::llround(spec.window_s * (1.0 - spec.overlap_fraction) * rate));
  if (hop < 1) hop = 1;
  const Eigen::Index n = biz.size();
  if (n < win) {
    throw Error(ErrorCode::SeriesShorterThanWindow, "preprocess",
                "series shorter than one window");
  }
  const Eigen::Index count = (n - win) / hop + 1;

  char buf[96];
  std::snprintf(buf, sizeof(buf), "segment(window_s=%g,overlap=%g)",
                spec.window_s, spec.overlap_fraction);
  std::vector<LabeledSegment> out;
  out.reserve(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    LabeledSegment seg;
    seg.biz = biz;
    seg.biz.values = biz.values.segment(i * hop, win);
    seg.biz.processing_log.push_back(buf);
    seg.ecg = ecg;
    seg.ecg.values = ecg.values.segment(i * hop, win);
    seg.ecg.processing_log.push_back(buf);
    seg.sbp_mmhg = sbp_mmhg;
    seg.dbp_mmhg = dbp_mmhg;
    seg.segment_index = static_cast<int>(i);
    seg.group_id = group_id;
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace biozbp::preprocess
