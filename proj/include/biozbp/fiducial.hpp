#pragma once

#include "biozbp/types.hpp"

namespace biozbp::fiducial {

// One cardiac cycle's anchor points on the BIOZ waveform. Cycles violating
// the rising-edge ordering or height ordering are flagged, never dropped.
struct CycleFiducials {
  double t_r = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double t_md = 0.0;
  double t_min_next = 0.0;
  double hi_max = 0.0;
  double hi_min = 0.0;
  double hi_md = 0.0;
  double hi_min_next = 0.0;
  bool valid = true;
  std::string flag_reason;
};

// Squared-derivative energy detector with 150 ms moving-window integration,
// adaptive thresholds and a 250 ms refractory period. Reported times are
// sub-sample refined local maxima of the input ECG.
std::vector<double> detect_r_peaks(const ProcessedSeries& ecg);

// Per R-R interval: minimum in [t_r, t_r + 0.5 RR], maximum in
// [t_min, next t_r], maximum first-difference in [t_min, t_max]; all with
// 3-point parabolic sub-sample refinement.
std::vector<CycleFiducials> detect_cycle_fiducials(
    const ProcessedSeries& biz, const std::vector<double>& r_times);

std::size_t count_flagged(const std::vector<CycleFiducials>& cycles);

// Debug export: one CSV row per cycle.
void export_cycles_csv(const std::string& path,
                       const std::vector<CycleFiducials>& cycles);

}  // namespace biozbp::fiducial
