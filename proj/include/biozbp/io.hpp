#pragma once

#include "biozbp/synth.hpp"
#include "biozbp/types.hpp"

#include <map>

namespace biozbp::io {

enum class Format { Csv, Bin };

Format format_from_name(const std::string& name);

// Canonical trial layout: one `#`-prefixed metadata header line, a column
// header `vs,vr,ecg`, then one row per sample. The binary twin is a fixed
// header plus little-endian 8-byte reals.
RawRecording load_raw(const std::string& path, Format format);
void save_raw(const RawRecording& rec, const std::string& path, Format format);

// Adapter for external column layouts (e.g. a public dataset whose CSV order
// differs): zero-based column indices plus metadata supplied by the caller
// when the file has no header line.
struct RawColumnMap {
  int vs_col = 0;
  int vr_col = 1;
  int ecg_col = 2;
  double sample_rate_hz = 0.0;      // 0 = require the file header
  double excitation_freq_hz = 0.0;  // 0 = require the file header
  double r0_ohm = 0.0;              // 0 = require the file header
};
RawRecording load_raw_mapped(const std::string& path, const RawColumnMap& map);

void save_series(const ProcessedSeries& series, const std::string& path);
ProcessedSeries load_series(const std::string& path);

void save_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable load_feature_table(const std::string& path);

void save_ground_truth(const synth::GroundTruth& truth, const std::string& path);
synth::GroundTruth load_ground_truth(const std::string& path);

// Per-trial reference labels: subject,trial,sbp_mmhg,dbp_mmhg rows.
struct TrialLabel {
  std::string subject_id;
  std::string trial_id;
  double sbp_mmhg = 0.0;
  double dbp_mmhg = 0.0;
};
void save_labels(const std::vector<TrialLabel>& labels, const std::string& path);
std::vector<TrialLabel> load_labels(const std::string& path);

struct SummaryStats {
  double sbp_mean = 0.0, sbp_sd = 0.0;
  double dbp_mean = 0.0, dbp_sd = 0.0;
  Eigen::Index n_rows = 0, n_valid = 0;
  std::map<std::string, Eigen::Index> per_subject;
  // 5 mmHg label histogram bins shared by both pressures.
  double bin_lo = 0.0, bin_width = 5.0;
  std::vector<Eigen::Index> sbp_hist, dbp_hist;
};

SummaryStats dataset_summary(const FeatureTable& table);
void save_summary(const SummaryStats& stats, const std::string& path);

}  // namespace biozbp::io
