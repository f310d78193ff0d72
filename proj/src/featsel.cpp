#include "biozbp/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace biozbp::featsel {

namespace {

// Rank positions ordered by score with the method's ordering; ties broken by
// canonical feature index (stable sort over index order).
std::vector<int> order_by(const Vector& key, bool descending) {
  std::vector<int> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return descending ? key(a) > key(b) : key(a) < key(b);
  });
  return idx;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Pcc: return "PCC";
    case Method::RfImpurity: return "RF_IMPURITY";
    case Method::Combined: return "COMBINED";
  }
  return "PCC";
}

Method method_from_name(const std::string& name) {
  if (name == "PCC" || name == "pcc") return Method::Pcc;
  if (name == "RF_IMPURITY" || name == "impurity" || name == "rf") {
    return Method::RfImpurity;
  }
  if (name == "COMBINED" || name == "combined") return Method::Combined;
  throw Error(ErrorCode::BadUsage, "featsel", "unknown method " + name);
}

int RankedFeatureSet::rank_of(int feature) const {
  for (std::size_t r = 0; r < ranks.size(); ++r) {
    if (ranks[r] == feature) return static_cast<int>(r);
  }
  return -1;
}

Vector pcc_scores(const FeatureTable& table, Target target) {
  const FeatureTable clean = table.valid_rows();
  const Eigen::Index n = clean.rows();
  if (n < 2) {
    throw Error(ErrorCode::TooFewRows, "featsel",
                "need at least 2 valid rows");
  }
  const Vector& y = target_labels(clean, target);
  const double mu_y = y.mean();
  const double ss_y = (y.array() - mu_y).square().sum();

  Vector r(clean.cols());
  for (Eigen::Index j = 0; j < clean.cols(); ++j) {
    const auto x = clean.features.col(j);
    const double mu_x = x.mean();
    const double ss_x = (x.array() - mu_x).square().sum();
    if (ss_x <= 0.0 || ss_y <= 0.0) {
      r(j) = 0.0;  // zero-variance feature, flagged by the caller
      continue;
    }
    const double cov = ((x.array() - mu_x) * (y.array() - mu_y)).sum();
    r(j) = cov / (std::sqrt(ss_x) * std::sqrt(ss_y));
  }
  return r;
}

RankedFeatureSet rank_pcc(const FeatureTable& table, Target target) {
  RankedFeatureSet out;
  out.method = Method::Pcc;
  out.target = target;
  out.scores = pcc_scores(table, target);
  for (Eigen::Index j = 0; j < out.scores.size(); ++j) {
    if (out.scores(j) == 0.0) out.zero_variance.push_back(static_cast<int>(j));
  }
  out.ranks = order_by(out.scores.array().abs(), /*descending=*/true);
  return out;
}

Vector impurity_scores(const FeatureTable& table, Target target,
                       const regress::ForestConfig& config,
                       std::uint64_t seed) {
  const FeatureTable clean = table.valid_rows();
  if (clean.rows() < 2) {
    throw Error(ErrorCode::TooFewRows, "featsel",
                "need at least 2 valid rows");
  }
  const Vector& y = target_labels(clean, target);
  if ((y.array() - y(0)).abs().maxCoeff() == 0.0) {
    throw Error(ErrorCode::DegenerateTarget, "featsel",
                "target labels are constant");
  }
  regress::ForestConfig cfg = config;
  cfg.seed = seed;
  regress::TrainedModel forest = regress::train_rf(clean.features, y, cfg);
  Vector imp = regress::forest_importance(forest);
  const double total = imp.sum();
  if (total > 0.0) imp /= total;  // normalized so scores sum to 1
  return imp;
}

RankedFeatureSet rank_impurity(const FeatureTable& table, Target target,
                               const regress::ForestConfig& config,
                               std::uint64_t seed) {
  RankedFeatureSet out;
  out.method = Method::RfImpurity;
  out.target = target;
  out.seed = seed;
  out.scores = impurity_scores(table, target, config, seed);
  out.ranks = order_by(out.scores, /*descending=*/true);
  return out;
}

RankedFeatureSet combined_ranking(const RankedFeatureSet& pcc,
                                  const RankedFeatureSet& imp) {
  if (pcc.target != imp.target ||
      pcc.scores.size() != imp.scores.size()) {
    throw Error(ErrorCode::MismatchedTargets, "featsel",
                "rankings disagree on target or feature universe");
  }
  const Eigen::Index p = pcc.scores.size();
  Vector avg(p);
  for (Eigen::Index f = 0; f < p; ++f) {
    avg(f) = 0.5 * (pcc.rank_of(static_cast<int>(f)) +
                    imp.rank_of(static_cast<int>(f)));
  }
  RankedFeatureSet out;
  out.method = Method::Combined;
  out.target = pcc.target;
  out.seed = imp.seed;
  out.scores = avg;
  out.ranks = order_by(avg, /*descending=*/false);  // lower average is better
  return out;
}

FeatureTable select_top_k(const FeatureTable& table,
                          const RankedFeatureSet& ranking, int k) {
  const int p = static_cast<int>(table.cols());
  if (k < 1 || k > p) {
    throw Error(ErrorCode::KOutOfRange, "featsel",
                "k must lie in [1, " + std::to_string(p) + "]");
  }
  std::vector<int> chosen(ranking.ranks.begin(), ranking.ranks.begin() + k);
  std::sort(chosen.begin(), chosen.end());  // canonical relative order

  FeatureTable out;
  out.features.resize(table.rows(), k);
  for (int c = 0; c < k; ++c) {
    out.features.col(c) = table.features.col(chosen[c]);
    out.feature_names.push_back(table.feature_names[chosen[c]]);
  }
  out.sbp = table.sbp;
  out.dbp = table.dbp;
  out.group_id = table.group_id;
  out.valid = table.valid;
  out.invalid_reason = table.invalid_reason;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "select(method=%s,k=%d,target=%s,seed=%llu)",
                method_name(ranking.method), k, target_name(ranking.target),
                static_cast<unsigned long long>(ranking.seed));
  out.provenance = table.provenance.empty()
                       ? std::string(buf)
                       : table.provenance + ";" + buf;
  return out;
}

std::vector<SweepPoint> sweep_top_k(const FeatureTable& table,
                                    const RankedFeatureSet& ranking,
                                    const std::vector<int>& k_grid,
                                    const regress::ForestConfig& rf_config,
                                    const eval::CvConfig& cv_config) {
  if (k_grid.empty()) {
    throw Error(ErrorCode::KOutOfRange, "featsel", "empty k grid");
  }
  std::vector<SweepPoint> curve;
  curve.reserve(k_grid.size());
  for (int k : k_grid) {
    FeatureTable projected = select_top_k(table, ranking, k);
    eval::ModelConfig model;
    model.kind = regress::ModelKind::Rf;
    model.forest = rf_config;
    eval::EvalReport rep = eval::cross_validate(projected, model, cv_config);
    curve.push_back({k, rep.pooled.mae, rep.pooled.rmse});
  }
  return curve;
}

void save_ranking_csv(const RankedFeatureSet& ranking,
                      const std::vector<std::string>& feature_names,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "featsel", "cannot write " + path);
  }
  out << "rank,feature,score\n";
  char buf[160];
  for (std::size_t r = 0; r < ranking.ranks.size(); ++r) {
    const int f = ranking.ranks[r];
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g\n", r,
                  feature_names[f].c_str(), ranking.scores(f));
    out << buf;
  }
}

}  // namespace biozbp::featsel
