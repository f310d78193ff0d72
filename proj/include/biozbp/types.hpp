#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace biozbp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVectorRef = Eigen::Ref<const Eigen::VectorXd>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode : int {
  // dataset-io
  MissingHeaderField = 10,
  LengthMismatch,
  NonFiniteSample,
  IoFailure,
  EmptyTable,
  // synth
  InvalidConfig,
  // demod
  DegenerateBlock,
  AliasedExcitation,
  BlockTooShort,
  // preprocess
  InvalidBand,
  SeriesTooShort,
  InvalidSpec,
  SeriesShorterThanWindow,
  // fiducial
  NoPeaksFound,
  EmptyCycleWindow,
  // features
  NoValidCycles,
  LevelNotCrossed,
  ZeroMinHeight,
  ZeroDuration,
  DegenerateDifference,
  ConstantSegment,
  UndefinedEntropy,
  TooFewPeaks,
  // featsel
  TooFewRows,
  DegenerateTarget,
  MismatchedTargets,
  KOutOfRange,
  // regress
  SingularDesign,
  EmptyTraining,
  NoConvergence,
  FeatureMismatch,
  // eval
  ZeroVariance,
  NonMonotoneCp,
  // cli
  BadUsage,
};

const char* error_code_name(ErrorCode code);

// Exception carrying an error code plus the pipeline stage that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string stage, const std::string& message)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const { return code_; }
  const std::string& stage() const { return stage_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Core data model
// ---------------------------------------------------------------------------

// Synchronized carrier-band sample streams from one measurement trial.
struct RawRecording {
  Vector vs_samples;   // excitation voltage [V]
  Vector vr_samples;   // sense-resistor voltage [V]
  Vector ecg_samples;  // ECG [V]
  double sample_rate_hz = 100000.0;
  double excitation_freq_hz = 10000.0;
  double r0_ohm = 10000.0;
  std::string subject_id;
  std::string trial_id;
  double duration_s = 0.0;

  Eigen::Index size() const { return vs_samples.size(); }
  // Throws on violated invariants (unequal lengths, unresolvable carrier,
  // non-finite samples, duration/length mismatch).
  void validate() const;
};

enum class SeriesKind { BiozAbs, BiozReal, BiozImag, Ecg };

const char* series_kind_name(SeriesKind kind);
SeriesKind series_kind_from_name(const std::string& name);

// A demodulated/filtered time series with a log of applied steps.
struct ProcessedSeries {
  Vector values;  // ohms for BIOZ kinds, volts for ECG
  double sample_rate_hz = 500.0;
  SeriesKind kind = SeriesKind::BiozAbs;
  std::vector<std::string> processing_log;

  Eigen::Index size() const { return values.size(); }
  double duration_s() const {
    return static_cast<double>(values.size()) / sample_rate_hz;
  }
};

// One windowed slice of aligned BIOZ + ECG with the trial's reference labels.
struct LabeledSegment {
  ProcessedSeries biz;
  ProcessedSeries ecg;
  double sbp_mmhg = 0.0;
  double dbp_mmhg = 0.0;
  int segment_index = 0;
  std::string group_id;  // subject/trial key
};

// Canonical feature order. Index i always refers to kFeatureNames[i].
inline constexpr int kNumFeatures = 42;
extern const std::array<const char*, kNumFeatures> kFeatureNames;

int feature_index(const std::string& name);  // -1 if unknown

struct FeatureVector {
  Eigen::Matrix<double, kNumFeatures, 1> values =
      Eigen::Matrix<double, kNumFeatures, 1>::Zero();
  bool valid = true;
  std::vector<std::string> reasons;  // why the vector was flagged invalid

  void flag(const std::string& reason) {
    valid = false;
    reasons.push_back(reason);
  }
};

// Row-major table of feature vectors with labels and group keys. Invalid
// rows are retained with flags so segment counts always reconcile.
struct FeatureTable {
  Matrix features;  // n x k (k == 42 for canonical tables)
  std::vector<std::string> feature_names;
  Vector sbp;  // n
  Vector dbp;  // n
  std::vector<std::string> group_id;       // n
  std::vector<std::uint8_t> valid;         // n
  std::vector<std::string> invalid_reason; // n ("" when valid)
  std::string provenance;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
  Eigen::Index valid_count() const;

  void append(const FeatureVector& fv, double sbp_mmhg, double dbp_mmhg,
              const std::string& group);
  // Sub-table restricted to rows flagged valid.
  FeatureTable valid_rows() const;
  void validate() const;
};

enum class Target { Sbp, Dbp };

const char* target_name(Target t);

inline const Vector& target_labels(const FeatureTable& table, Target t) {
  return t == Target::Sbp ? table.sbp : table.dbp;
}

}  // namespace biozbp
