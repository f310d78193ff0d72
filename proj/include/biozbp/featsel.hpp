#pragma once

#include "biozbp/eval.hpp"
#include "biozbp/regress.hpp"
#include "biozbp/types.hpp"

namespace biozbp::featsel {

enum class Method { Pcc, RfImpurity, Combined };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct RankedFeatureSet {
  Method method = Method::Pcc;
  Vector scores;           // per feature, indexed canonically
  std::vector<int> ranks;  // ranks[r] = feature index at rank position r
  Target target = Target::Sbp;
  int k_selected = 0;
  std::uint64_t seed = 0;
  std::vector<int> zero_variance;  // features flagged during scoring

  int rank_of(int feature) const;
};

// Pearson correlation of each feature against the target label; ranking uses
// |r| descending, ties broken by canonical feature index.
Vector pcc_scores(const FeatureTable& table, Target target);
RankedFeatureSet rank_pcc(const FeatureTable& table, Target target);

// Forest impurity importance: per-split weighted-SSE decrease accumulated by
// feature, averaged over trees, normalized to sum 1.
Vector impurity_scores(const FeatureTable& table, Target target,
                       const regress::ForestConfig& config, std::uint64_t seed);
RankedFeatureSet rank_impurity(const FeatureTable& table, Target target,
                               const regress::ForestConfig& config,
                               std::uint64_t seed);

// Average of the two method ranks; final order ascending by averaged rank,
// ties broken by feature index.
RankedFeatureSet combined_ranking(const RankedFeatureSet& pcc,
                                  const RankedFeatureSet& imp);

// Projects the table onto the top-k ranked features, preserving canonical
// relative column order.
FeatureTable select_top_k(const FeatureTable& table,
                          const RankedFeatureSet& ranking, int k);

struct SweepPoint {
  int k = 0;
  double mae = 0.0;
  double rmse = 0.0;
};

// Cross-validated error with the RF regressor as a function of the number of
// selected features.
std::vector<SweepPoint> sweep_top_k(const FeatureTable& table,
                                    const RankedFeatureSet& ranking,
                                    const std::vector<int>& k_grid,
                                    const regress::ForestConfig& rf_config,
                                    const eval::CvConfig& cv_config);

void save_ranking_csv(const RankedFeatureSet& ranking,
                      const std::vector<std::string>& feature_names,
                      const std::string& path);

}  // namespace biozbp::featsel
