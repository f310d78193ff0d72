#include "biozbp/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace biozbp::eval {

namespace {

std::string subject_of(const std::string& group) {
  const auto slash = group.find('/');
  return slash == std::string::npos ? group : group.substr(0, slash);
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

regress::TrainedModel train_dispatch(const ModelConfig& cfg, const Matrix& x,
                                     const Vector& y) {
  switch (cfg.kind) {
    case regress::ModelKind::Lr: return regress::train_lr(x, y);
    case regress::ModelKind::Dt: return regress::train_cart(x, y, cfg.forest);
    case regress::ModelKind::Rf: return regress::train_rf(x, y, cfg.forest);
    case regress::ModelKind::Svr: return regress::train_svr(x, y, cfg.svr);
  }
  throw Error(ErrorCode::BadUsage, "eval", "unknown model kind");
}

}  // namespace

const char* split_unit_name(SplitUnit unit) {
  switch (unit) {
    case SplitUnit::Segment: return "SEGMENT";
    case SplitUnit::Trial: return "TRIAL";
    case SplitUnit::Subject: return "SUBJECT";
  }
  return "SEGMENT";
}

SplitUnit split_unit_from_name(const std::string& name) {
  if (name == "SEGMENT") return SplitUnit::Segment;
  if (name == "TRIAL") return SplitUnit::Trial;
  if (name == "SUBJECT") return SplitUnit::Subject;
  throw Error(ErrorCode::BadUsage, "eval", "unknown split unit " + name);
}

std::vector<int> kfold_split(Eigen::Index n_rows,
                             const std::vector<std::string>& groups,
                             const CvConfig& config) {
  if (config.n_folds < 2) {
    throw Error(ErrorCode::BadUsage, "eval", "n_folds must be >= 2");
  }
  if (n_rows < config.n_folds) {
    throw Error(ErrorCode::TooFewRows, "eval",
                "fewer rows than folds");
  }
  std::mt19937_64 rng(config.shuffle_seed);
  std::vector<int> fold(n_rows, -1);

  if (config.split_unit == SplitUnit::Segment) {
    std::vector<Eigen::Index> idx(n_rows);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    // First (n % k) folds take the extra row.
    const Eigen::Index k = config.n_folds;
    const Eigen::Index base = n_rows / k;
    const Eigen::Index extra = n_rows % k;
    Eigen::Index pos = 0;
    for (Eigen::Index f = 0; f < k; ++f) {
      const Eigen::Index size = base + (f < extra ? 1 : 0);
      for (Eigen::Index t = 0; t < size; ++t) fold[idx[pos++]] = static_cast<int>(f);
    }
    return fold;
  }

  if (static_cast<Eigen::Index>(groups.size()) != n_rows) {
    throw Error(ErrorCode::LengthMismatch, "eval",
                "group keys required for grouped splits");
  }
  std::vector<std::string> keys(n_rows);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    keys[i] = config.split_unit == SplitUnit::Subject ? subject_of(groups[i])
                                                      : groups[i];
  }
  std::map<std::string, std::vector<Eigen::Index>> by_key;
  for (Eigen::Index i = 0; i < n_rows; ++i) by_key[keys[i]].push_back(i);
  std::vector<std::string> unique_keys;
  unique_keys.reserve(by_key.size());
  for (const auto& [k, v] : by_key) unique_keys.push_back(k);
  std::shuffle(unique_keys.begin(), unique_keys.end(), rng);

  std::vector<Eigen::Index> load(config.n_folds, 0);
  for (const auto& key : unique_keys) {
    int best = 0;
    for (int f = 1; f < config.n_folds; ++f) {
      if (load[f] < load[best]) best = f;
    }
    for (Eigen::Index i : by_key[key]) fold[i] = best;
    load[best] += static_cast<Eigen::Index>(by_key[key].size());
  }
  return fold;
}

Metrics metrics(ConstVectorRef reference, ConstVectorRef estimate) {
  const Eigen::Index n = reference.size();
  if (n < 1 || estimate.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "eval",
                "reference/estimate length mismatch");
  }
  Metrics m;
  const Vector err = estimate - reference;
  m.me = err.mean();
  m.mae = err.array().abs().mean();
  m.rmse = std::sqrt(err.array().square().mean());

  const double mu_r = reference.mean();
  const double mu_e = estimate.mean();
  const double var_r = (reference.array() - mu_r).square().sum();
  const double var_e = (estimate.array() - mu_e).square().sum();
  if (var_r <= 0.0 || var_e <= 0.0) {
    m.r_defined = false;  // ZeroVariance: R undefined
    m.r = 0.0;
  } else {
    const double cov =
        ((reference.array() - mu_r) * (estimate.array() - mu_e)).sum();
    m.r = cov / std::sqrt(var_r * var_e);
  }
  return m;
}

bool aami_check(double me, double rmse) {
  return std::abs(me) <= 5.0 && rmse <= 8.0;
}

char bhs_grade(double cp5, double cp10, double cp15) {
  const bool in_range = cp5 >= 0.0 && cp15 <= 100.0;
  if (!in_range || cp5 > cp10 || cp10 > cp15) {
    throw Error(ErrorCode::NonMonotoneCp, "eval",
                "CP percentages must be monotone within [0, 100]");
  }
  if (cp5 >= 60.0 && cp10 >= 85.0 && cp15 >= 95.0) return 'A';
  if (cp5 >= 50.0 && cp10 >= 75.0 && cp15 >= 90.0) return 'B';
  if (cp5 >= 40.0 && cp10 >= 65.0 && cp15 >= 85.0) return 'C';
  return 'F';
}

EvalReport cross_validate(const FeatureTable& table, const ModelConfig& model,
                          const CvConfig& config) {
  table.validate();
  const FeatureTable clean = table.valid_rows();
  const Eigen::Index n = clean.rows();
  if (n < config.n_folds) {
    throw Error(ErrorCode::TooFewRows, "eval", "too few valid rows");
  }
  const Vector& y = target_labels(clean, config.target);
  const std::vector<int> fold = kfold_split(n, clean.group_id, config);

  Vector estimate(n);
  std::vector<double> fold_mae, fold_rmse, fold_r;
  for (int f = 0; f < config.n_folds; ++f) {
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      (fold[i] == f ? test_idx : train_idx).push_back(i);
    }
    if (test_idx.empty()) continue;
    Matrix xtr(train_idx.size(), clean.cols());
    Vector ytr(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      xtr.row(i) = clean.features.row(train_idx[i]);
      ytr(i) = y(train_idx[i]);
    }
    Matrix xte(test_idx.size(), clean.cols());
    Vector yte(test_idx.size());
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      xte.row(i) = clean.features.row(test_idx[i]);
      yte(i) = y(test_idx[i]);
    }
    regress::TrainedModel trained = train_dispatch(model, xtr, ytr);
    Vector pred = regress::predict(trained, xte);
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      estimate(test_idx[i]) = pred(i);
    }
    const Metrics fm = metrics(yte, pred);
    fold_mae.push_back(fm.mae);
    fold_rmse.push_back(fm.rmse);
    if (fm.r_defined) fold_r.push_back(fm.r);
  }

  EvalReport rep;
  rep.target = config.target;
  rep.n_rows = n;
  rep.n_excluded = table.rows() - n;
  rep.model_description = regress::model_kind_name(model.kind);
  rep.pooled = metrics(y, estimate);

  const auto mean_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) /
                           static_cast<double>(v.size());
  };
  rep.mae_mean = mean_of(fold_mae);
  rep.mae_sd = sample_sd(fold_mae, rep.mae_mean);
  rep.rmse_mean = mean_of(fold_rmse);
  rep.rmse_sd = sample_sd(fold_rmse, rep.rmse_mean);
  rep.r_mean = mean_of(fold_r);
  rep.r_sd = sample_sd(fold_r, rep.r_mean);

  Eigen::Index c5 = 0, c10 = 0, c15 = 0;
  rep.residuals.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = std::abs(estimate(i) - y(i));
    c5 += e <= 5.0;
    c10 += e <= 10.0;
    c15 += e <= 15.0;
    rep.residuals.emplace_back(y(i), estimate(i));
  }
  rep.cp5 = 100.0 * static_cast<double>(c5) / static_cast<double>(n);
  rep.cp10 = 100.0 * static_cast<double>(c10) / static_cast<double>(n);
  rep.cp15 = 100.0 * static_cast<double>(c15) / static_cast<double>(n);
  rep.aami_pass = aami_check(rep.pooled.me, rep.pooled.rmse);
  rep.bhs = bhs_grade(rep.cp5, rep.cp10, rep.cp15);
  return rep;
}

void export_plots(const EvalReport& report, const std::string& prefix) {
  char buf[256];
  {
    // Histogram of estimation errors, 1 mmHg bins.
    std::vector<double> err;
    err.reserve(report.residuals.size());
    for (const auto& [ref, est] : report.residuals) err.push_back(est - ref);
    const double lo = std::floor(*std::min_element(err.begin(), err.end()));
    const double hi = std::ceil(*std::max_element(err.begin(), err.end()));
    const int bins = std::max(1, static_cast<int>(hi - lo));
    std::vector<int> counts(bins, 0);
    for (double e : err) {
      int b = static_cast<int>(std::floor(e - lo));
      b = std::clamp(b, 0, bins - 1);
      ++counts[b];
    }
    std::ofstream out(prefix + "_error_hist.csv");
    out << "bin_lo_mmhg,bin_hi_mmhg,count\n";
    for (int b = 0; b < bins; ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", lo + b, lo + b + 1,
                    counts[b]);
      out << buf;
    }
  }
  {
    // Reference vs estimate with an LS fitted line.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(report.residuals.size());
    for (const auto& [ref, est] : report.residuals) {
      sx += ref;
      sy += est;
      sxx += ref * ref;
      sxy += ref * est;
    }
    const double denom = n * sxx - sx * sx;
    const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    const double inter = (sy - slope * sx) / n;
    std::ofstream out(prefix + "_scatter.csv");
    std::snprintf(buf, sizeof(buf), "# fit_slope=%.17g fit_intercept=%.17g\n",
                  slope, inter);
    out << buf << "reference_mmhg,estimate_mmhg\n";
    for (const auto& [ref, est] : report.residuals) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", ref, est);
      out << buf;
    }
  }
  {
    // Bland-Altman: pairwise means vs differences, bias and 1.96 SD limits.
    std::vector<double> diff;
    diff.reserve(report.residuals.size());
    std::ofstream out(prefix + "_bland_altman.csv");
    out << "mean_mmhg,diff_mmhg\n";
    for (const auto& [ref, est] : report.residuals) {
      const double m = 0.5 * (ref + est);
      const double d = est - ref;
      diff.push_back(d);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", m, d);
      out << buf;
    }
    const double bias =
        std::accumulate(diff.begin(), diff.end(), 0.0) / diff.size();
    const double sd = sample_sd(diff, bias);
    std::ofstream lim(prefix + "_bland_altman_limits.csv");
    lim << "bias_mmhg,sd_mmhg,loa_low_mmhg,loa_high_mmhg\n";
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", bias, sd,
                  bias - 1.96 * sd, bias + 1.96 * sd);
    lim << buf;
  }
}

namespace {
using nlohmann::json;
}

void save_report_json(const EvalReport& report, const std::string& path) {
  json j;
  j["format"] = "biozbp-report-v1";
  j["target"] = target_name(report.target);
  j["me"] = report.pooled.me;
  j["mae"] = report.pooled.mae;
  j["rmse"] = report.pooled.rmse;
  j["r"] = report.pooled.r;
  j["r_defined"] = report.pooled.r_defined;
  j["mae_mean"] = report.mae_mean;
  j["mae_sd"] = report.mae_sd;
  j["rmse_mean"] = report.rmse_mean;
  j["rmse_sd"] = report.rmse_sd;
  j["r_mean"] = report.r_mean;
  j["r_sd"] = report.r_sd;
  j["cp5"] = report.cp5;
  j["cp10"] = report.cp10;
  j["cp15"] = report.cp15;
  j["aami_pass"] = report.aami_pass;
  j["bhs"] = std::string(1, report.bhs);
  j["n_rows"] = report.n_rows;
  j["n_excluded"] = report.n_excluded;
  j["model"] = report.model_description;
  json res = json::array();
  for (const auto& [ref, est] : report.residuals) res.push_back({ref, est});
  j["residuals"] = std::move(res);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "eval", "cannot write " + path);
  out << j.dump() << "\n";
}

EvalReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "eval", "cannot read " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "biozbp-report-v1") {
    throw Error(ErrorCode::IoFailure, "eval", "unrecognized report file");
  }
  EvalReport rep;
  rep.target = j["target"].get<std::string>() == "SBP" ? Target::Sbp : Target::Dbp;
  rep.pooled.me = j["me"].get<double>();
  rep.pooled.mae = j["mae"].get<double>();
  rep.pooled.rmse = j["rmse"].get<double>();
  rep.pooled.r = j["r"].get<double>();
  rep.pooled.r_defined = j["r_defined"].get<bool>();
  rep.mae_mean = j["mae_mean"].get<double>();
  rep.mae_sd = j["mae_sd"].get<double>();
  rep.rmse_mean = j["rmse_mean"].get<double>();
  rep.rmse_sd = j["rmse_sd"].get<double>();
  rep.r_mean = j["r_mean"].get<double>();
  rep.r_sd = j["r_sd"].get<double>();
  rep.cp5 = j["cp5"].get<double>();
  rep.cp10 = j["cp10"].get<double>();
  rep.cp15 = j["cp15"].get<double>();
  rep.aami_pass = j["aami_pass"].get<bool>();
  rep.bhs = j["bhs"].get<std::string>()[0];
  rep.n_rows = j["n_rows"].get<Eigen::Index>();
  rep.n_excluded = j["n_excluded"].get<Eigen::Index>();
  rep.model_description = j.value("model", "");
  for (const auto& p : j["residuals"]) {
    rep.residuals.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return rep;
}

std::string render_report(const EvalReport& report) {
  std::ostringstream os;
  char buf[256];
  os << "=== " << target_name(report.target) << " estimation ("
     << report.model_description << ", " << report.n_rows << " rows, "
     << report.n_excluded << " excluded) ===\n";
  std::snprintf(buf, sizeof(buf),
                "pooled: ME %.2f  MAE %.2f  RMSE %.2f  R %.3f%s\n",
                report.pooled.me, report.pooled.mae, report.pooled.rmse,
                report.pooled.r, report.pooled.r_defined ? "" : " (undefined)");
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "folds : MAE %.2f +/- %.2f  RMSE %.2f +/- %.2f  R %.3f +/- %.3f\n",
                report.mae_mean, report.mae_sd, report.rmse_mean, report.rmse_sd,
                report.r_mean, report.r_sd);
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "CP    : <=5mmHg %.1f%%  <=10mmHg %.1f%%  <=15mmHg %.1f%%\n",
                report.cp5, report.cp10, report.cp15);
  os << buf;
  std::snprintf(buf, sizeof(buf), "AAMI  : %s (|ME| <= 5, RMSE <= 8)\n",
                report.aami_pass ? "PASS" : "FAIL");
  os << buf;
  std::snprintf(buf, sizeof(buf), "BHS   : grade %c\n", report.bhs);
  os << buf;
  return os.str();
}

}  // namespace biozbp::eval
