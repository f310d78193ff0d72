#include "biozbp/types.hpp"

#include <cmath>

namespace biozbp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeaderField: return "MissingHeaderField";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteSample: return "NonFiniteSample";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateBlock: return "DegenerateBlock";
    case ErrorCode::AliasedExcitation: return "AliasedExcitation";
    case ErrorCode::BlockTooShort: return "BlockTooShort";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::SeriesShorterThanWindow: return "SeriesShorterThanWindow";
    case ErrorCode::NoPeaksFound: return "NoPeaksFound";
    case ErrorCode::EmptyCycleWindow: return "EmptyCycleWindow";
    case ErrorCode::NoValidCycles: return "NoValidCycles";
    case ErrorCode::LevelNotCrossed: return "LevelNotCrossed";
    case ErrorCode::ZeroMinHeight: return "ZeroMinHeight";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::DegenerateDifference: return "DegenerateDifference";
    case ErrorCode::ConstantSegment: return "ConstantSegment";
    case ErrorCode::UndefinedEntropy: return "UndefinedEntropy";
    case ErrorCode::TooFewPeaks: return "TooFewPeaks";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::MismatchedTargets: return "MismatchedTargets";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NonMonotoneCp: return "NonMonotoneCp";
    case ErrorCode::BadUsage: return "BadUsage";
  }
  return "Unknown";
}

void RawRecording::validate() const {
  const Eigen::Index n = vs_samples.size();
  if (n < 1 || vr_samples.size() != n || ecg_samples.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "dataset-io",
                "sample streams must have equal length >= 1");
  }
  if (!(sample_rate_hz > 0.0) || !(excitation_freq_hz > 0.0) ||
      !(r0_ohm > 0.0)) {
    throw Error(ErrorCode::MissingHeaderField, "dataset-io",
                "sample_rate_hz, excitation_freq_hz, r0_ohm must be positive");
  }
  if (sample_rate_hz / excitation_freq_hz < 4.0) {
    throw Error(ErrorCode::AliasedExcitation, "dataset-io",
                "sample_rate_hz / excitation_freq_hz must be >= 4");
  }
  const double expected = static_cast<double>(n) / sample_rate_hz;
  if (std::abs(expected - duration_s) > 1.0 / sample_rate_hz + 1e-12) {
    throw Error(ErrorCode::LengthMismatch, "dataset-io",
                "duration_s inconsistent with sample count");
  }
  if (!vs_samples.allFinite() || !vr_samples.allFinite() ||
      !ecg_samples.allFinite()) {
    throw Error(ErrorCode::NonFiniteSample, "dataset-io",
                "recording contains NaN/Inf samples");
  }
}

const char* series_kind_name(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::BiozAbs: return "BIOZ_ABS";
    case SeriesKind::BiozReal: return "BIOZ_REAL";
    case SeriesKind::BiozImag: return "BIOZ_IMAG";
    case SeriesKind::Ecg: return "ECG";
  }
  return "BIOZ_ABS";
}

SeriesKind series_kind_from_name(const std::string& name) {
  if (name == "BIOZ_ABS") return SeriesKind::BiozAbs;
  if (name == "BIOZ_REAL") return SeriesKind::BiozReal;
  if (name == "BIOZ_IMAG") return SeriesKind::BiozImag;
  if (name == "ECG") return SeriesKind::Ecg;
  throw Error(ErrorCode::IoFailure, "dataset-io",
              "unknown series kind: " + name);
}

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "PTT_max", "PTT_min", "PAT",
    "DW", "DW25", "DW50", "DW75", "DW90",
    "SW", "SW25", "SW50", "SW75", "SW90",
    "PW", "PW25", "PW50", "PW75", "PW90",
    "PWR25", "PWR50", "PWR75", "PWR90",
    "HI_max", "HI_min", "HI_MD", "PP", "HIR_max", "HIR_MD",
    "AS", "DS",
    "HId_max", "PWd", "PWd50", "PWRd", "ASd", "DSd",
    "SD", "Skew", "Kurt",
    "ApEn", "SampEn",
    "HR"};

int feature_index(const std::string& name) {
  for (int i = 0; i < kNumFeatures; ++i) {
    if (name == kFeatureNames[i]) return i;
  }
  return -1;
}

Eigen::Index FeatureTable::valid_count() const {
  Eigen::Index n = 0;
  for (auto v : valid) n += (v != 0);
  return n;
}

void FeatureTable::append(const FeatureVector& fv, double sbp_mmhg,
                          double dbp_mmhg, const std::string& group) {
  const Eigen::Index n = rows();
  if (feature_names.empty()) {
    feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
  }
  if (features.cols() != kNumFeatures && n == 0) {
    features.resize(0, kNumFeatures);
  }
  features.conservativeResize(n + 1, Eigen::NoChange);
  features.row(n) = fv.values.transpose();
  sbp.conservativeResize(n + 1);
  dbp.conservativeResize(n + 1);
  sbp(n) = sbp_mmhg;
  dbp(n) = dbp_mmhg;
  group_id.push_back(group);
  valid.push_back(fv.valid ? 1 : 0);
  std::string reason;
  for (const auto& r : fv.reasons) {
    if (!reason.empty()) reason += ";";
    reason += r;
  }
  invalid_reason.push_back(reason);
}

FeatureTable FeatureTable::valid_rows() const {
  FeatureTable out;
  out.feature_names = feature_names;
  out.provenance = provenance;
  const Eigen::Index n = rows();
  Eigen::Index m = valid_count();
  out.features.resize(m, cols());
  out.sbp.resize(m);
  out.dbp.resize(m);
  out.group_id.reserve(m);
  out.valid.reserve(m);
  out.invalid_reason.reserve(m);
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    out.features.row(j) = features.row(i);
    out.sbp(j) = sbp(i);
    out.dbp(j) = dbp(i);
    out.group_id.push_back(group_id[i]);
    out.valid.push_back(1);
    out.invalid_reason.push_back("");
    ++j;
  }
  return out;
}

void FeatureTable::validate() const {
  const Eigen::Index n = rows();
  if (static_cast<Eigen::Index>(feature_names.size()) != cols()) {
    throw Error(ErrorCode::LengthMismatch, "dataset-io",
                "feature_names size does not match column count");
  }
  if (sbp.size() != n || dbp.size() != n ||
      static_cast<Eigen::Index>(group_id.size()) != n ||
      static_cast<Eigen::Index>(valid.size()) != n ||
      static_cast<Eigen::Index>(invalid_reason.size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "dataset-io",
                "feature table columns out of sync");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (valid[i] && !features.row(i).allFinite()) {
      throw Error(ErrorCode::NonFiniteSample, "dataset-io",
                  "valid row " + std::to_string(i) + " has non-finite entries");
    }
  }
}

const char* target_name(Target t) { return t == Target::Sbp ? "SBP" : "DBP"; }

}  // namespace biozbp
