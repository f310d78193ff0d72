#pragma once

#include "biozbp/types.hpp"

#include <cstdint>

namespace biozbp::regress {

enum class ModelKind { Lr, Dt, Rf, Svr };

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ForestConfig {
  int n_trees = 500;
  int min_samples_leaf = 1;
  int max_depth = -1;  // -1 = unlimited
  // Features tried per split. 0 = default rule: all features when p <= 10
  // (the deployed top-10 configuration), otherwise ceil(p/3).
  int mtry = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  int resolve_mtry(int p) const {
    if (mtry > 0) return std::min(mtry, p);
    return p <= 10 ? p : (p + 2) / 3;
  }
};

struct SvrConfig {
  double c = 1e3;
  double epsilon = 0.1;
  double gamma = 0.0;  // 0 = 1/(p * mean standardized-feature variance)
  double tol = 1e-3;
  long max_passes = 2000000;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prediction = 0.0;
  double n_samples = 0.0;          // weighted rows reaching the node
  double impurity_decrease = 0.0;  // SSE(parent) - SSE(left) - SSE(right)
};

struct Tree {
  std::vector<TreeNode> nodes;
};

struct TrainedModel {
  ModelKind kind = ModelKind::Lr;
  int n_features = 0;

  // Per-feature standardization applied at train and predict (identity for
  // tree models, which are split-order invariant).
  bool standardized = false;
  Vector feat_mean;
  Vector feat_sd;

  // LR
  Vector coef;  // in standardized space
  double intercept = 0.0;
  bool ridge_fallback = false;

  // DT / RF
  std::vector<Tree> trees;
  ForestConfig forest_config;

  // SVR
  Matrix support_x;  // standardized support vectors
  Vector beta;       // alpha - alpha* per support vector
  double bias = 0.0;
  double gamma_value = 0.0;
  SvrConfig svr_config;

  std::string provenance;
};

TrainedModel train_lr(const Matrix& x, const Vector& y);
TrainedModel train_cart(const Matrix& x, const Vector& y,
                        const ForestConfig& config = {});
TrainedModel train_rf(const Matrix& x, const Vector& y,
                      const ForestConfig& config = {});
TrainedModel train_svr(const Matrix& x, const Vector& y,
                       const SvrConfig& config = {});

Vector predict(const TrainedModel& model, const Matrix& x);
double predict_tree(const Tree& tree, ConstVectorRef x);

// Mean over trees of the per-split weighted-SSE decrease accumulated by
// feature; the raw (unnormalized) forest importance.
Vector forest_importance(const TrainedModel& model);

// Self-describing text (JSON) persistence with bit-exact round-trip.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace biozbp::regress
