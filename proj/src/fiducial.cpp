#include "biozbp/fiducial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace biozbp::fiducial {

namespace {

struct Refined {
  double pos;    // fractional sample index
  double value;  // interpolated extremum value
};

// 3-point parabolic vertex around a discrete extremum at k; delta clamped to
// half a sample. Scale-invariant.
Refined refine_parabolic(ConstVectorRef x, Eigen::Index k) {
  Refined r{static_cast<double>(k), x(k)};
  if (k <= 0 || k >= x.size() - 1) return r;
  const double ym = x(k - 1), y0 = x(k), yp = x(k + 1);
  const double denom = ym - 2.0 * y0 + yp;
  if (denom == 0.0) return r;
  double delta = 0.5 * (ym - yp) / denom;
  delta = std::clamp(delta, -0.5, 0.5);
  r.pos = static_cast<double>(k) + delta;
  r.value = y0 - 0.25 * (ym - yp) * delta;
  return r;
}

Eigen::Index argmax_range(ConstVectorRef x, Eigen::Index lo, Eigen::Index hi) {
  Eigen::Index best = lo;
  for (Eigen::Index i = lo + 1; i <= hi; ++i) {
    if (x(i) > x(best)) best = i;
  }
  return best;
}

Eigen::Index argmin_range(ConstVectorRef x, Eigen::Index lo, Eigen::Index hi) {
  Eigen::Index best = lo;
  for (Eigen::Index i = lo + 1; i <= hi; ++i) {
    if (x(i) < x(best)) best = i;
  }
  return best;
}

double lerp_at(ConstVectorRef x, double pos, double fs) {
  (void)fs;
  const Eigen::Index k = static_cast<Eigen::Index>(std::floor(pos));
  if (k < 0) return x(0);
  if (k >= x.size() - 1) return x(x.size() - 1);
  const double frac = pos - static_cast<double>(k);
  return x(k) * (1.0 - frac) + x(k + 1) * frac;
}

}  // namespace

std::vector<double> detect_r_peaks(const ProcessedSeries& ecg) {
  const double fs = ecg.sample_rate_hz;
  const Eigen::Index n = ecg.size();
  if (n < static_cast<Eigen::Index>(2.0 * fs)) {
    throw Error(ErrorCode::NoPeaksFound, "fiducial",
                "ECG shorter than 2 s");
  }
  const ConstVectorRef x = ecg.values;

  // Detection function: central derivative, squared, integrated over 150 ms.
  Vector sq(n);
  sq(0) = sq(n - 1) = 0.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double d = (x(i + 1) - x(i - 1)) * fs * 0.5;
    sq(i) = d * d;
  }
  Eigen::Index w = static_cast<Eigen::Index>(std::llround(0.150 * fs));
  if (w % 2 == 0) ++w;
  const Eigen::Index hw = w / 2;
  Vector mwi = Vector::Zero(n);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < std::min(w, n); ++i) acc += sq(i);
  for (Eigen::Index i = hw; i + hw < n; ++i) {
    mwi(i) = acc / w;
    if (i + hw + 1 < n) acc += sq(i + hw + 1) - sq(i - hw);
  }

  // Candidate peaks of the integrated energy.
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (mwi(i) > mwi(i - 1) && mwi(i) >= mwi(i + 1) && mwi(i) > 0.0) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::NoPeaksFound, "fiducial",
                "no energy peaks in ECG");
  }

  const Eigen::Index init_span = std::min<Eigen::Index>(
      n, static_cast<Eigen::Index>(std::llround(2.0 * fs)));
  double spk = mwi.head(init_span).maxCoeff() * 0.5;
  double npk = mwi.head(init_span).mean() * 0.5;
  const double refractory = 0.250;
  const Eigen::Index refr = static_cast<Eigen::Index>(std::llround(refractory * fs));

  std::vector<Eigen::Index> accepted;
  std::vector<double> rr_hist;
  Eigen::Index last = -refr - 1;
  double last_qrs_energy = 0.0;
  std::size_t searchback_from = 0;
  const Eigen::Index twave_span =
      static_cast<Eigen::Index>(std::llround(0.360 * fs));

  auto accept = [&](Eigen::Index k) {
    if (!accepted.empty()) rr_hist.push_back((k - accepted.back()) / fs);
    if (rr_hist.size() > 8) rr_hist.erase(rr_hist.begin());
    accepted.push_back(k);
    last = k;
    last_qrs_energy = mwi(k);
    spk = 0.125 * mwi(k) + 0.875 * spk;
  };

  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    const Eigen::Index k = candidates[ci];
    const double thr = npk + 0.25 * (spk - npk);
    if (k - last < refr) continue;
    // T-wave discrimination: soon after a QRS, a peak with under half its
    // integrated energy is repolarization, not a beat.
    const bool twave = !accepted.empty() && (k - last) < twave_span &&
                       mwi(k) < 0.5 * last_qrs_energy;
    if (mwi(k) > thr && !twave) {
      accept(k);
      searchback_from = ci + 1;
    } else {
      npk = 0.125 * mwi(k) + 0.875 * npk;
      // Search back with half threshold when a beat seems missed.
      if (!rr_hist.empty() && !accepted.empty()) {
        const double rr_avg =
            std::accumulate(rr_hist.begin(), rr_hist.end(), 0.0) / rr_hist.size();
        if ((k - last) / fs > 1.66 * rr_avg) {
          Eigen::Index best = -1;
          for (std::size_t cj = searchback_from; cj <= ci; ++cj) {
            const Eigen::Index kk = candidates[cj];
            if (kk - last < refr) continue;
            if (mwi(kk) > 0.5 * thr && (best < 0 || mwi(kk) > mwi(best))) best = kk;
          }
          if (best >= 0) {
            accept(best);
            searchback_from = ci + 1;
          }
        }
      }
    }
  }
  if (accepted.empty()) {
    throw Error(ErrorCode::NoPeaksFound, "fiducial",
                "no peaks above adaptive threshold");
  }

  // Refine each detection to the local ECG maximum.
  const Eigen::Index search = static_cast<Eigen::Index>(std::llround(0.100 * fs));
  std::vector<double> times;
  for (Eigen::Index k : accepted) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, k - search);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, k + search);
    const Eigen::Index peak = argmax_range(x, lo, hi);
    Refined r = refine_parabolic(x, peak);
    const double t = r.pos / fs;
    if (!times.empty() && t - times.back() < refractory) {
      // Two detections resolved to the same QRS: keep the taller one.
      if (lerp_at(x, r.pos, fs) > lerp_at(x, times.back() * fs, fs)) {
        times.back() = t;
      }
      continue;
    }
    times.push_back(t);
  }
  return times;
}

std::vector<CycleFiducials> detect_cycle_fiducials(
    const ProcessedSeries& biz, const std::vector<double>& r_times) {
  if (r_times.size() < 2) {
    throw Error(ErrorCode::EmptyCycleWindow, "fiducial",
                "need at least 2 R peaks");
  }
  const double fs = biz.sample_rate_hz;
  const Eigen::Index n = biz.size();
  const ConstVectorRef x = biz.values;

  // Forward first difference scaled to ohms/s; sample k lives at (k+0.5)/fs.
  Vector diff(n > 1 ? n - 1 : 0);
  for (Eigen::Index i = 0; i + 1 < n; ++i) diff(i) = (x(i + 1) - x(i)) * fs;

  auto clamp_idx = [&](double t) {
    return std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(t * fs)), 0, n - 1);
  };

  // Pass 1: one BIOZ minimum per R-R interval.
  const std::size_t m = r_times.size();
  std::vector<Refined> mins(m - 1);
  std::vector<bool> min_ok(m - 1, false);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double rr = r_times[i + 1] - r_times[i];
    const Eigen::Index lo = clamp_idx(r_times[i]);
    const Eigen::Index hi = clamp_idx(r_times[i] + 0.5 * rr);
    if (hi <= lo) continue;
    const Eigen::Index k = argmin_range(x, lo, hi);
    mins[i] = refine_parabolic(x, k);
    min_ok[i] = true;
  }

  std::vector<CycleFiducials> cycles;
  for (std::size_t i = 0; i + 2 < m; ++i) {
    CycleFiducials c;
    c.t_r = r_times[i];
    if (!min_ok[i] || !min_ok[i + 1]) {
      c.valid = false;
      c.flag_reason = "EmptyCycleWindow";
      cycles.push_back(c);
      continue;
    }
    c.t_min = mins[i].pos / fs;
    c.hi_min = mins[i].value;
    c.t_min_next = mins[i + 1].pos / fs;
    c.hi_min_next = mins[i + 1].value;

    // Maximum between the minimum and the next R peak.
    const Eigen::Index max_lo = clamp_idx(c.t_min);
    const Eigen::Index max_hi = clamp_idx(r_times[i + 1]);
    if (max_hi <= max_lo) {
      c.valid = false;
      c.flag_reason = "EmptyCycleWindow";
      cycles.push_back(c);
      continue;
    }
    const Eigen::Index kmax = argmax_range(x, max_lo, max_hi);
    Refined rmax = refine_parabolic(x, kmax);
    c.t_max = rmax.pos / fs;
    c.hi_max = rmax.value;

    // Maximum-derivative point between t_min and t_max.
    Eigen::Index dlo = static_cast<Eigen::Index>(std::ceil(c.t_min * fs - 0.5));
    Eigen::Index dhi = static_cast<Eigen::Index>(std::floor(c.t_max * fs - 0.5));
    dlo = std::clamp<Eigen::Index>(dlo, 0, diff.size() - 1);
    dhi = std::clamp<Eigen::Index>(dhi, 0, diff.size() - 1);
    if (dhi < dlo) {
      c.valid = false;
      c.flag_reason = "EmptyCycleWindow";
      cycles.push_back(c);
      continue;
    }
    const Eigen::Index kmd = argmax_range(diff, dlo, dhi);
    const double dmax = diff.segment(dlo, dhi - dlo + 1).maxCoeff();
    const double dmin = diff.segment(dlo, dhi - dlo + 1).minCoeff();
    const double dspan = dmax - dmin;
    const double dscale = std::max(std::abs(dmax), std::abs(dmin));
    Refined rmd = refine_parabolic(diff, kmd);
    c.t_md = (rmd.pos + 0.5) / fs;
    c.hi_md = lerp_at(x, c.t_md * fs, fs);

    if (dspan <= 1e-12 * dscale) {
      c.valid = false;
      c.flag_reason = "DegenerateMd";
    } else if (!(c.t_r <= c.t_min && c.t_min < c.t_md && c.t_md < c.t_max &&
                 c.t_max < c.t_min_next)) {
      c.valid = false;
      c.flag_reason = "OrderingViolation";
    } else if (!(c.hi_min <= c.hi_md && c.hi_md <= c.hi_max)) {
      c.valid = false;
      c.flag_reason = "HeightOrderingViolation";
    }
    cycles.push_back(c);
  }
  return cycles;
}

std::size_t count_flagged(const std::vector<CycleFiducials>& cycles) {
  std::size_t k = 0;
  for (const auto& c : cycles) k += c.valid ? 0 : 1;
  return k;
}

void export_cycles_csv(const std::string& path,
                       const std::vector<CycleFiducials>& cycles) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "fiducial", "cannot write " + path);
  }
  out << "t_r,t_min,t_md,t_max,t_min_next,hi_min,hi_md,hi_max,valid,flag\n";
  char buf[512];
  for (const auto& c : cycles) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s\n",
                  c.t_r, c.t_min, c.t_md, c.t_max, c.t_min_next, c.hi_min,
                  c.hi_md, c.hi_max, c.valid ? 1 : 0, c.flag_reason.c_str());
    out << buf;
  }
}

}  // namespace biozbp::fiducial
