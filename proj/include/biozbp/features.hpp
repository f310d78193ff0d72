#pragma once

#include "biozbp/fiducial.hpp"
#include "biozbp/types.hpp"

namespace biozbp::features {

using fiducial::CycleFiducials;

struct PttFeatures {
  double ptt_max = 0.0;
  double ptt_min = 0.0;
  double pat = 0.0;
};

struct WidthFeatures {
  double dw = 0.0, dw25 = 0.0, dw50 = 0.0, dw75 = 0.0, dw90 = 0.0;
  double sw = 0.0, sw25 = 0.0, sw50 = 0.0, sw75 = 0.0, sw90 = 0.0;
  double pw = 0.0, pw25 = 0.0, pw50 = 0.0, pw75 = 0.0, pw90 = 0.0;
  double pwr25 = 0.0, pwr50 = 0.0, pwr75 = 0.0, pwr90 = 0.0;
  std::size_t used_cycles = 0;
};

struct HeightFeatures {
  double hi_max = 0.0, hi_min = 0.0, hi_md = 0.0, pp = 0.0;
  double hir_max = 0.0, hir_md = 0.0;
  bool ratios_valid = true;
};

struct SlopeFeatures {
  double as = 0.0;
  double ds = 0.0;
};

struct DiffFeatures {
  double hid_max = 0.0, pwd = 0.0, pwd50 = 0.0, pwrd = 0.0;
  double asd = 0.0, dsd = 0.0;
  bool slopes_valid = true;  // false when the difference waveform is flat
};

struct StatFeatures {
  double sd = 0.0, skew = 0.0, kurt = 0.0;
  bool shape_valid = true;  // skew/kurt undefined on constant segments
};

struct EntropyFeatures {
  double apen = 0.0, sampen = 0.0;
  bool defined = true;
};

// Eqs on the cycle anchors: PTT_max = t_max - t_r, PTT_min = t_min - t_r,
// PAT = t_md - t_r; segment value is the mean over valid cycles.
PttFeatures ptt_features(const std::vector<CycleFiducials>& cycles);

// Widths from level crossings at 25/50/75/90 % of each cycle's own
// min-to-max span, located by linear interpolation on the innermost
// bracketing samples of each limb.
WidthFeatures width_features(const std::vector<CycleFiducials>& cycles,
                             const ProcessedSeries& biz);

HeightFeatures height_features(const std::vector<CycleFiducials>& cycles);

SlopeFeatures slope_features(const std::vector<CycleFiducials>& cycles);

// Features of the first-difference waveform (forward difference scaled by the
// sample rate). The differential pulse is delimited by the surrounding local
// minima of the difference, falling back to zero crossings, then to the cycle
// window edges.
DiffFeatures diff_features(const std::vector<CycleFiducials>& cycles,
                           const ProcessedSeries& biz);

// Sample SD (n-1); skewness m3/m2^1.5 and non-excess kurtosis m4/m2^2 on the
// full segment.
StatFeatures stat_features(ConstVectorRef segment);

// ApEn (self-matches included) and SampEn (excluded), Chebyshev distance,
// tolerance r = r_frac * SD(segment).
EntropyFeatures entropy_features(ConstVectorRef segment, int m = 2,
                                 double r_frac = 0.2);

double heart_rate(const std::vector<double>& r_times);

struct ExtractReport {
  FeatureVector vector;
  std::size_t detected_cycles = 0;
  std::size_t valid_cycles = 0;
  std::size_t excluded_cycles = 0;
};

// Runs R detection + cycle fiducials on the segment and assembles the
// canonical 42-entry vector. Any flagged sub-feature marks the vector invalid
// with its reason; values stay populated where computable.
ExtractReport extract_all(const LabeledSegment& segment);

}  // namespace biozbp::features
