#include "biozbp/features.hpp"

#include <algorithm>
#include <cmath>

namespace biozbp::features {

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

// Innermost ascending crossing of `level` scanning from the peak back toward
// the cycle minimum. Returns the interpolated fractional sample index, or a
// negative value when the limb never brackets the level.
double ascend_crossing(ConstVectorRef x, Eigen::Index lo, Eigen::Index peak,
                       double level) {
  for (Eigen::Index j = peak - 1; j >= lo; --j) {
    if (x(j) <= level && x(j + 1) > level) {
      const double den = x(j + 1) - x(j);
      const double frac = den > 0.0 ? (level - x(j)) / den : 0.0;
      return static_cast<double>(j) + frac;
    }
  }
  return -1.0;
}

double descend_crossing(ConstVectorRef x, Eigen::Index peak, Eigen::Index hi,
                        double level) {
  for (Eigen::Index j = peak; j + 1 <= hi; ++j) {
    if (x(j) > level && x(j + 1) <= level) {
      const double den = x(j) - x(j + 1);
      const double frac = den > 0.0 ? (x(j) - level) / den : 0.0;
      return static_cast<double>(j) + frac;
    }
  }
  return -1.0;
}

Eigen::Index clamp_index(double t, double fs, Eigen::Index n) {
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::llround(t * fs)),
                                  0, n - 1);
}

}  // namespace

PttFeatures ptt_features(const std::vector<CycleFiducials>& cycles) {
  Mean mmax, mmin, mpat;
  for (const auto& c : cycles) {
    if (!c.valid) continue;
    mmax.add(c.t_max - c.t_r);
    mmin.add(c.t_min - c.t_r);
    mpat.add(c.t_md - c.t_r);
  }
  if (mmax.n == 0) {
    throw Error(ErrorCode::NoValidCycles, "features", "no valid cycles");
  }
  return {mmax.value(), mmin.value(), mpat.value()};
}

WidthFeatures width_features(const std::vector<CycleFiducials>& cycles,
                             const ProcessedSeries& biz) {
  const double fs = biz.sample_rate_hz;
  const Eigen::Index n = biz.size();
  const ConstVectorRef x = biz.values;
  constexpr double kLevels[4] = {0.25, 0.50, 0.75, 0.90};

  Mean pw, sw, dw;
  Mean swx[4], dwx[4], pwx[4], pwrx[4];
  std::size_t used = 0;

  for (const auto& c : cycles) {
    if (!c.valid) continue;
    const double cycle_pw = c.t_min_next - c.t_min;
    const double cycle_sw = c.t_max - c.t_min;
    const double cycle_dw = c.t_min_next - c.t_max;
    const Eigen::Index lo = clamp_index(c.t_min, fs, n);
    const Eigen::Index peak = clamp_index(c.t_max, fs, n);
    const Eigen::Index hi = clamp_index(c.t_min_next, fs, n);
    const double span = c.hi_max - c.hi_min;
    if (!(span > 0.0)) continue;  // flat cycle: levels undefined

    double asc[4], desc[4];
    bool crossed = true;
    for (int l = 0; l < 4; ++l) {
      const double level = c.hi_min + kLevels[l] * span;
      asc[l] = ascend_crossing(x, lo, peak, level);
      desc[l] = descend_crossing(x, peak, hi, level);
      if (asc[l] < 0.0 || desc[l] < 0.0) {
        crossed = false;
        break;
      }
    }
    if (!crossed) continue;  // LevelNotCrossed: cycle excluded from widths

    pw.add(cycle_pw);
    sw.add(cycle_sw);
    dw.add(cycle_dw);
    for (int l = 0; l < 4; ++l) {
      const double t_asc = asc[l] / fs;
      const double t_desc = desc[l] / fs;
      swx[l].add(c.t_max - t_asc);
      dwx[l].add(t_desc - c.t_max);
      pwx[l].add(t_desc - t_asc);
      pwrx[l].add((t_desc - t_asc) / cycle_pw);
    }
    ++used;
  }

  if (used == 0) {
    throw Error(ErrorCode::LevelNotCrossed, "features",
                "no cycle crossed all fractional levels");
  }
  WidthFeatures out;
  out.used_cycles = used;
  out.pw = pw.value();
  out.sw = sw.value();
  out.dw = dw.value();
  out.sw25 = swx[0].value();
  out.sw50 = swx[1].value();
  out.sw75 = swx[2].value();
  out.sw90 = swx[3].value();
  out.dw25 = dwx[0].value();
  out.dw50 = dwx[1].value();
  out.dw75 = dwx[2].value();
  out.dw90 = dwx[3].value();
  out.pw25 = pwx[0].value();
  out.pw50 = pwx[1].value();
  out.pw75 = pwx[2].value();
  out.pw90 = pwx[3].value();
  out.pwr25 = pwrx[0].value();
  out.pwr50 = pwrx[1].value();
  out.pwr75 = pwrx[2].value();
  out.pwr90 = pwrx[3].value();
  return out;
}

HeightFeatures height_features(const std::vector<CycleFiducials>& cycles) {
  Mean hmax, hmin, hmd, pp, rmax, rmd;
  for (const auto& c : cycles) {
    if (!c.valid) continue;
    hmax.add(c.hi_max);
    hmin.add(c.hi_min);
    hmd.add(c.hi_md);
    pp.add(c.hi_max - c.hi_min);
    const double denom_scale = std::max(std::abs(c.hi_max), std::abs(c.hi_min));
    if (std::abs(c.hi_min) > 1e-12 * std::max(denom_scale, 1e-300)) {
      rmax.add(c.hi_max / c.hi_min);
      rmd.add(c.hi_md / c.hi_min);
    }
  }
  if (hmax.n == 0) {
    throw Error(ErrorCode::NoValidCycles, "features", "no valid cycles");
  }
  HeightFeatures out;
  out.hi_max = hmax.value();
  out.hi_min = hmin.value();
  out.hi_md = hmd.value();
  out.pp = pp.value();
  if (rmax.n == 0) {
    out.ratios_valid = false;  // ZeroMinHeight on every cycle
  } else {
    out.hir_max = rmax.value();
    out.hir_md = rmd.value();
  }
  return out;
}

SlopeFeatures slope_features(const std::vector<CycleFiducials>& cycles) {
  Mean as, ds;
  for (const auto& c : cycles) {
    if (!c.valid) continue;
    const double rise = c.t_max - c.t_min;
    const double fall = c.t_max - c.t_min_next;
    if (rise == 0.0 || fall == 0.0) continue;  // ZeroDuration: skip cycle
    as.add((c.hi_max - c.hi_min) / rise);
    ds.add((c.hi_max - c.hi_min_next) / fall);
  }
  if (as.n == 0) {
    throw Error(ErrorCode::ZeroDuration, "features",
                "no cycle with nonzero rise and fall durations");
  }
  return {as.value(), ds.value()};
}

DiffFeatures diff_features(const std::vector<CycleFiducials>& cycles,
                           const ProcessedSeries& biz) {
  const double fs = biz.sample_rate_hz;
  const Eigen::Index n = biz.size();
  const ConstVectorRef x = biz.values;
  if (n < 3) {
    throw Error(ErrorCode::DegenerateDifference, "features",
                "need at least 3 samples per cycle");
  }
  Vector d(n - 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) d(i) = (x(i + 1) - x(i)) * fs;
  auto d_time = [&](double pos) { return (pos + 0.5) / fs; };

  Mean hid, pwd, pwd50, pwrd, asd, dsd;
  bool any_flat = false;

  for (const auto& c : cycles) {
    if (!c.valid) continue;
    Eigen::Index lo = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(c.t_min * fs)), 0, d.size() - 1);
    Eigen::Index hi = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(c.t_min_next * fs)) - 1, 0,
        d.size() - 1);
    if (hi - lo < 2) continue;

    Eigen::Index peak = lo;
    for (Eigen::Index j = lo + 1; j <= hi; ++j) {
      if (d(j) > d(peak)) peak = j;
    }
    const double dmax_v = d(peak);
    double dmin_v = d(lo);
    for (Eigen::Index j = lo + 1; j <= hi; ++j) dmin_v = std::min(dmin_v, d(j));
    const double span = dmax_v - dmin_v;
    const double scale = std::max(std::abs(dmax_v), std::abs(dmin_v));
    const bool flat = span <= 1e-12 * scale;

    hid.add(dmax_v);

    // Left delimiter: nearest local minimum of d, else zero crossing, else
    // the window start. Right delimiter mirrored. A flat difference waveform
    // has no structure: the pulse spans the whole cycle window.
    Eigen::Index left = lo;
    Eigen::Index right = hi;
    if (!flat) {
      bool found = false;
      for (Eigen::Index j = peak - 1; j > lo; --j) {
        if (d(j) < d(j - 1) && d(j) <= d(j + 1)) {
          left = j;
          found = true;
          break;
        }
      }
      if (!found) {
        for (Eigen::Index j = peak; j > lo; --j) {
          if (d(j - 1) <= 0.0 && d(j) > 0.0) {
            left = j - 1;
            break;
          }
        }
      }
      found = false;
      for (Eigen::Index j = peak + 1; j < hi; ++j) {
        if (d(j) < d(j + 1) && d(j) <= d(j - 1)) {
          right = j;
          found = true;
          break;
        }
      }
      if (!found) {
        for (Eigen::Index j = peak; j < hi; ++j) {
          if (d(j) > 0.0 && d(j + 1) <= 0.0) {
            right = j + 1;
            break;
          }
        }
      }
    }
    const double t_left = d_time(static_cast<double>(left));
    const double t_right = d_time(static_cast<double>(right));
    pwd.add(t_right - t_left);

    if (flat) {
      any_flat = true;  // ASd/DSd and fractional widths undefined
      continue;
    }

    // Width at 50% of the differential pulse, relative to its own base.
    double base = d(left);
    for (Eigen::Index j = left; j <= right; ++j) base = std::min(base, d(j));
    const double level = base + 0.5 * (dmax_v - base);
    const double asc = ascend_crossing(d, left, peak, level);
    const double desc = descend_crossing(d, peak, right, level);
    if (asc >= 0.0 && desc >= 0.0) {
      const double w50 = (desc - asc) / fs;
      pwd50.add(w50);
      pwrd.add(w50 / (t_right - t_left));
    }

    const double t_peak = d_time(static_cast<double>(peak));
    if (t_peak > t_left && t_peak < t_right) {
      asd.add((dmax_v - d(left)) / (t_peak - t_left));
      dsd.add((dmax_v - d(right)) / (t_peak - t_right));
    }
  }

  if (hid.n == 0) {
    throw Error(ErrorCode::DegenerateDifference, "features",
                "no usable cycle for differential features");
  }
  (void)any_flat;
  DiffFeatures out;
  out.hid_max = hid.value();
  out.pwd = pwd.value();
  out.slopes_valid = asd.n > 0 && pwd50.n > 0;
  if (out.slopes_valid) {
    out.pwd50 = pwd50.value();
    out.pwrd = pwrd.value();
    out.asd = asd.value();
    out.dsd = dsd.value();
  }
  return out;
}

StatFeatures stat_features(ConstVectorRef segment) {
  const Eigen::Index n = segment.size();
  if (n < 3) {
    throw Error(ErrorCode::ConstantSegment, "features",
                "need at least 3 samples");
  }
  StatFeatures out;
  if (segment.maxCoeff() == segment.minCoeff()) {
    out.sd = 0.0;
    out.shape_valid = false;  // constant segment: Skew/Kurt undefined
    return out;
  }
  const double mean = segment.mean();
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = segment(i) - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double nn = static_cast<double>(n);
  out.sd = std::sqrt(m2 / (nn - 1.0));
  m2 /= nn;
  m3 /= nn;
  m4 /= nn;
  if (m2 <= 0.0) {
    out.shape_valid = false;
  } else {
    out.skew = m3 / std::pow(m2, 1.5);
    out.kurt = m4 / (m2 * m2);
  }
  return out;
}

EntropyFeatures entropy_features(ConstVectorRef x, int m, double r_frac) {
  const Eigen::Index n = x.size();
  if (n < m + 2) {
    throw Error(ErrorCode::UndefinedEntropy, "features",
                "segment too short for the embedding dimension");
  }
  const double mean = x.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = x(i) - mean;
    ss += d * d;
  }
  const double r = r_frac * std::sqrt(ss / (static_cast<double>(n) - 1.0));

  const Eigen::Index nm1 = n - m + 1;  // templates of length m
  const Eigen::Index nm = n - m;       // templates of length m+1
  std::vector<std::uint32_t> cm(nm1, 1), cm1(nm, 1);  // self-matches included
  std::uint64_t big_a = 0, big_b = 0;

  const double* p = x.data();
  for (Eigen::Index i = 0; i < nm1; ++i) {
    for (Eigen::Index j = i + 1; j < nm1; ++j) {
      bool match_m = true;
      for (int k = 0; k < m; ++k) {
        if (std::abs(p[i + k] - p[j + k]) > r) {
          match_m = false;
          break;
        }
      }
      if (!match_m) continue;
      ++cm[i];
      ++cm[j];
      if (j < nm) {  // implies i < nm: both (m+1)-templates exist
        ++big_b;
        if (std::abs(p[i + m] - p[j + m]) <= r) {
          ++big_a;
          ++cm1[i];
          ++cm1[j];
        }
      }
    }
  }

  EntropyFeatures out;
  double phi_m = 0.0, phi_m1 = 0.0;
  for (Eigen::Index i = 0; i < nm1; ++i) {
    phi_m += std::log(static_cast<double>(cm[i]) / static_cast<double>(nm1));
  }
  phi_m /= static_cast<double>(nm1);
  for (Eigen::Index i = 0; i < nm; ++i) {
    phi_m1 += std::log(static_cast<double>(cm1[i]) / static_cast<double>(nm));
  }
  phi_m1 /= static_cast<double>(nm);
  out.apen = phi_m - phi_m1;

  if (big_a == 0 || big_b == 0) {
    out.defined = false;  // UndefinedEntropy sentinel: SampEn left at 0
    out.sampen = 0.0;
  } else {
    out.sampen = -std::log(static_cast<double>(big_a) / static_cast<double>(big_b));
  }
  return out;
}

double heart_rate(const std::vector<double>& r_times) {
  if (r_times.size() < 2) {
    throw Error(ErrorCode::TooFewPeaks, "features",
                "need at least 2 R peaks for heart rate");
  }
  const double span = r_times.back() - r_times.front();
  const double mean_rr = span / static_cast<double>(r_times.size() - 1);
  return 60.0 / mean_rr;
}

ExtractReport extract_all(const LabeledSegment& segment) {
  ExtractReport rep;
  FeatureVector& fv = rep.vector;

  std::vector<double> r_times;
  std::vector<CycleFiducials> cycles;
  try {
    r_times = fiducial::detect_r_peaks(segment.ecg);
    cycles = fiducial::detect_cycle_fiducials(segment.biz, r_times);
  } catch (const Error& e) {
    fv.flag(std::string("NoValidCycles:") + error_code_name(e.code()));
    return rep;
  }
  rep.detected_cycles = cycles.size();
  rep.excluded_cycles = fiducial::count_flagged(cycles);
  rep.valid_cycles = cycles.size() - rep.excluded_cycles;
  if (rep.valid_cycles == 0) {
    fv.flag("NoValidCycles");
    return rep;
  }

  auto put = [&](const char* name, double value) {
    fv.values(feature_index(name)) = value;
  };

  try {
    const PttFeatures ptt = ptt_features(cycles);
    put("PTT_max", ptt.ptt_max);
    put("PTT_min", ptt.ptt_min);
    put("PAT", ptt.pat);
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  try {
    const WidthFeatures w = width_features(cycles, segment.biz);
    put("DW", w.dw);
    put("DW25", w.dw25);
    put("DW50", w.dw50);
    put("DW75", w.dw75);
    put("DW90", w.dw90);
    put("SW", w.sw);
    put("SW25", w.sw25);
    put("SW50", w.sw50);
    put("SW75", w.sw75);
    put("SW90", w.sw90);
    put("PW", w.pw);
    put("PW25", w.pw25);
    put("PW50", w.pw50);
    put("PW75", w.pw75);
    put("PW90", w.pw90);
    put("PWR25", w.pwr25);
    put("PWR50", w.pwr50);
    put("PWR75", w.pwr75);
    put("PWR90", w.pwr90);
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  try {
    const HeightFeatures h = height_features(cycles);
    put("HI_max", h.hi_max);
    put("HI_min", h.hi_min);
    put("HI_MD", h.hi_md);
    put("PP", h.pp);
    if (h.ratios_valid) {
      put("HIR_max", h.hir_max);
      put("HIR_MD", h.hir_md);
    } else {
      fv.flag("ZeroMinHeight");
    }
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  try {
    const SlopeFeatures s = slope_features(cycles);
    put("AS", s.as);
    put("DS", s.ds);
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  try {
    const DiffFeatures d = diff_features(cycles, segment.biz);
    put("HId_max", d.hid_max);
    put("PWd", d.pwd);
    if (d.slopes_valid) {
      put("PWd50", d.pwd50);
      put("PWRd", d.pwrd);
      put("ASd", d.asd);
      put("DSd", d.dsd);
    } else {
      fv.flag("DegenerateDifference");
    }
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  const StatFeatures st = stat_features(segment.biz.values);
  put("SD", st.sd);
  if (st.shape_valid) {
    put("Skew", st.skew);
    put("Kurt", st.kurt);
  } else {
    fv.flag("ConstantSegment");
  }

  try {
    const EntropyFeatures en = entropy_features(segment.biz.values);
    put("ApEn", en.apen);
    if (en.defined) {
      put("SampEn", en.sampen);
    } else {
      fv.flag("UndefinedEntropy");
    }
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  try {
    put("HR", heart_rate(r_times));
  } catch (const Error& e) {
    fv.flag(error_code_name(e.code()));
  }

  return rep;
}

}  // namespace biozbp::features
