#pragma once

#include "biozbp/regress.hpp"
#include "biozbp/types.hpp"

#include <optional>

namespace biozbp::eval {

enum class SplitUnit { Segment, Trial, Subject };

const char* split_unit_name(SplitUnit unit);
SplitUnit split_unit_from_name(const std::string& name);

struct CvConfig {
  int n_folds = 10;
  std::uint64_t shuffle_seed = 0;
  SplitUnit split_unit = SplitUnit::Segment;
  Target target = Target::Sbp;
};

struct ModelConfig {
  regress::ModelKind kind = regress::ModelKind::Rf;
  regress::ForestConfig forest;
  regress::SvrConfig svr;
};

struct Metrics {
  double me = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double r = 0.0;
  bool r_defined = true;  // false when either side has zero variance
};

struct EvalReport {
  Target target = Target::Sbp;
  Metrics pooled;
  double mae_mean = 0.0, mae_sd = 0.0;
  double rmse_mean = 0.0, rmse_sd = 0.0;
  double r_mean = 0.0, r_sd = 0.0;
  double cp5 = 0.0, cp10 = 0.0, cp15 = 0.0;  // cumulative |error| percentages
  bool aami_pass = false;
  char bhs = 'F';  // 'A', 'B', 'C' or 'F'
  std::vector<std::pair<double, double>> residuals;  // (reference, estimate)
  Eigen::Index n_rows = 0;
  Eigen::Index n_excluded = 0;
  std::string model_description;
};

// Fold id per row. Seeded shuffle, then a near-equal partition; TRIAL/SUBJECT
// units keep all of a group's rows in one fold (greedy smallest-fold
// assignment in shuffled group order).
std::vector<int> kfold_split(Eigen::Index n_rows,
                             const std::vector<std::string>& groups,
                             const CvConfig& config);

Metrics metrics(ConstVectorRef reference, ConstVectorRef estimate);

// AAMI: |ME| <= 5 mmHg and RMSE <= 8 mmHg.
bool aami_check(double me, double rmse);

// BHS: best grade whose three thresholds are all met; 'F' when none.
char bhs_grade(double cp5, double cp10, double cp15);

EvalReport cross_validate(const FeatureTable& table, const ModelConfig& model,
                          const CvConfig& config);

// Plot-ready CSV exports: error histogram, reference-vs-estimate scatter with
// a fitted line, Bland-Altman points and limits.
void export_plots(const EvalReport& report, const std::string& prefix);

void save_report_json(const EvalReport& report, const std::string& path);
EvalReport load_report_json(const std::string& path);

// Text rendering of the metric / AAMI / BHS tables.
std::string render_report(const EvalReport& report);

}  // namespace biozbp::eval
