#include "biozbp/regress.hpp"

#include "biozbp/threading.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace biozbp::regress {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void standardize_fit(const Matrix& x, Vector& mean, Vector& sd) {
  const Eigen::Index n = x.rows(), p = x.cols();
  mean = x.colwise().mean();
  sd.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var =
        (x.col(j).array() - mean(j)).square().sum() / std::max<double>(n - 1, 1);
    sd(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
}

Matrix standardize_apply(const Matrix& x, const Vector& mean, const Vector& sd) {
  Matrix out = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.col(j) = (x.col(j).array() - mean(j)) / sd(j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weighted CART with per-feature presorted index arrays. Bootstrap resamples
// enter as integer row weights, which is exactly equivalent to duplicating
// rows. Tie-breaks: lowest SSE, then lowest feature index, then lowest
// threshold, scanning in that order and accepting strict improvements only.
// ---------------------------------------------------------------------------

struct CartBuilder {
  const Matrix& x;
  const Vector& y;
  const std::vector<double>& w;  // per-row weights (0 = out of bag)
  const ForestConfig& config;
  int mtry;
  std::mt19937_64* rng;  // nullptr when mtry == p (no draws consumed)

  std::vector<std::vector<int>> order;  // per feature, active rows sorted
  std::vector<char> side;               // scratch: split side per row
  std::vector<int> scratch;
  Tree tree;

  CartBuilder(const Matrix& x_, const Vector& y_, const std::vector<double>& w_,
              const ForestConfig& cfg, const std::vector<std::vector<int>>& presort,
              std::mt19937_64* rng_)
      : x(x_), y(y_), w(w_), config(cfg),
        mtry(cfg.resolve_mtry(static_cast<int>(x_.cols()))), rng(rng_) {
    const int p = static_cast<int>(x.cols());
    order.resize(p);
    for (int j = 0; j < p; ++j) {
      order[j].reserve(presort[j].size());
      for (int i : presort[j]) {
        if (w[i] > 0.0) order[j].push_back(i);
      }
    }
    side.assign(x.rows(), 0);
    scratch.reserve(order.empty() ? 0 : order[0].size());
  }

  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double sse_left = 0.0, sse_right = 0.0;
    double cost = 0.0;
  };

  static double sse(double sum, double sum2, double n) {
    const double v = sum2 - sum * sum / n;
    return v > 0.0 ? v : 0.0;
  }

  Split find_split(int lo, int hi, double n_node, double sum_y, double sum_y2,
                   std::vector<int>& feat_buf) {
    const int p = static_cast<int>(x.cols());
    feat_buf.clear();
    if (mtry >= p) {
      for (int j = 0; j < p; ++j) feat_buf.push_back(j);
    } else {
      // Partial Fisher-Yates over [0, p), then sorted for index tie-breaks.
      std::vector<int> pool(p);
      for (int j = 0; j < p; ++j) pool[j] = j;
      for (int k = 0; k < mtry; ++k) {
        const int r = k + static_cast<int>((*rng)() % (p - k));
        std::swap(pool[k], pool[r]);
      }
      feat_buf.assign(pool.begin(), pool.begin() + mtry);
      std::sort(feat_buf.begin(), feat_buf.end());
    }

    Split best;
    const double msl = config.min_samples_leaf;
    for (int j : feat_buf) {
      const auto& idx = order[j];
      double nl = 0.0, sl = 0.0, sl2 = 0.0;
      for (int t = lo; t + 1 < hi; ++t) {
        const int i = idx[t];
        const double wi = w[i];
        nl += wi;
        sl += wi * y(i);
        sl2 += wi * y(i) * y(i);
        const double v = x(i, j);
        const double vn = x(idx[t + 1], j);
        if (vn <= v) continue;  // not a boundary between distinct values
        if (nl < msl || n_node - nl < msl) continue;
        const double cost =
            sse(sl, sl2, nl) + sse(sum_y - sl, sum_y2 - sl2, n_node - nl);
        // Costs within 1e-12 relative count as ties, so the scan order
        // (lowest feature, then lowest threshold) decides.
        if (!best.found || cost < best.cost - 1e-12 * best.cost) {
          best.found = true;
          best.cost = cost;
          best.feature = j;
          best.threshold = v + 0.5 * (vn - v);
          best.sse_left = sse(sl, sl2, nl);
          best.sse_right = sse(sum_y - sl, sum_y2 - sl2, n_node - nl);
        }
      }
    }
    return best;
  }

  // Partitions every feature's index range [lo, hi) by the split side flags,
  // stably, returning the left-count boundary.
  int partition(int lo, int hi, int split_feature, double threshold) {
    int n_left = 0;
    {
      const auto& idx = order[split_feature];
      for (int t = lo; t < hi; ++t) {
        const bool left = x(idx[t], split_feature) <= threshold;
        side[idx[t]] = left ? 1 : 0;
        n_left += left ? 1 : 0;
      }
    }
    for (auto& idx : order) {
      scratch.clear();
      int write = lo;
      for (int t = lo; t < hi; ++t) {
        const int i = idx[t];
        if (side[i]) {
          idx[write++] = i;
        } else {
          scratch.push_back(i);
        }
      }
      std::copy(scratch.begin(), scratch.end(), idx.begin() + write);
    }
    return lo + n_left;
  }

  int build(int lo, int hi, int depth) {
    double n_node = 0.0, sum_y = 0.0, sum_y2 = 0.0;
    const auto& idx0 = order[0];
    for (int t = lo; t < hi; ++t) {
      const int i = idx0[t];
      n_node += w[i];
      sum_y += w[i] * y(i);
      sum_y2 += w[i] * y(i) * y(i);
    }
    const double node_sse = sse(sum_y, sum_y2, n_node);

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    TreeNode& node = tree.nodes[node_id];
    node.prediction = sum_y / n_node;
    node.n_samples = n_node;

    const bool depth_ok = config.max_depth < 0 || depth < config.max_depth;
    const bool size_ok = n_node >= 2.0 * config.min_samples_leaf;
    const bool impure = node_sse > 1e-12 * std::max(1.0, sum_y2);
    if (!depth_ok || !size_ok || !impure || hi - lo < 2) return node_id;

    std::vector<int> feat_buf;
    Split split = find_split(lo, hi, n_node, sum_y, sum_y2, feat_buf);
    if (!split.found) return node_id;

    const int mid = partition(lo, hi, split.feature, split.threshold);
    // Re-fetch: recursion invalidates the reference.
    tree.nodes[node_id].feature = split.feature;
    tree.nodes[node_id].threshold = split.threshold;
    tree.nodes[node_id].impurity_decrease =
        node_sse - split.sse_left - split.sse_right;
    const int left_id = build(lo, mid, depth + 1);
    tree.nodes[node_id].left = left_id;
    const int right_id = build(mid, hi, depth + 1);
    tree.nodes[node_id].right = right_id;
    return node_id;
  }
};

std::vector<std::vector<int>> presort_features(const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  std::vector<std::vector<int>> order(p);
  for (int j = 0; j < p; ++j) {
    order[j].resize(n);
    for (int i = 0; i < n; ++i) order[j][i] = i;
    std::stable_sort(order[j].begin(), order[j].end(),
                     [&](int a, int b) { return x(a, j) < x(b, j); });
  }
  return order;
}

Tree build_tree(const Matrix& x, const Vector& y, const std::vector<double>& w,
                const ForestConfig& config,
                const std::vector<std::vector<int>>& presort,
                std::mt19937_64* rng) {
  CartBuilder builder(x, y, w, config, presort, rng);
  if (builder.order[0].empty()) {
    throw Error(ErrorCode::EmptyTraining, "regress", "no in-bag rows");
  }
  builder.build(0, static_cast<int>(builder.order[0].size()), 0);
  return std::move(builder.tree);
}

// RBF kernel between standardized rows.
double rbf(ConstVectorRef a, ConstVectorRef b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

}  // namespace

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Lr: return "LR";
    case ModelKind::Dt: return "DT";
    case ModelKind::Rf: return "RF";
    case ModelKind::Svr: return "SVR";
  }
  return "LR";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "LR") return ModelKind::Lr;
  if (name == "DT") return ModelKind::Dt;
  if (name == "RF") return ModelKind::Rf;
  if (name == "SVR") return ModelKind::Svr;
  throw Error(ErrorCode::IoFailure, "regress", "unknown model kind " + name);
}

TrainedModel train_lr(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n < 1 || y.size() != n) {
    throw Error(ErrorCode::EmptyTraining, "regress", "empty training set");
  }
  TrainedModel model;
  model.kind = ModelKind::Lr;
  model.n_features = static_cast<int>(p);
  model.standardized = true;
  standardize_fit(x, model.feat_mean, model.feat_sd);
  Matrix xs = standardize_apply(x, model.feat_mean, model.feat_sd);

  Matrix design(n, p + 1);
  design.leftCols(p) = xs;
  design.col(p).setOnes();

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  Vector beta;
  if (qr.rank() == p + 1) {
    beta = qr.solve(y);
  } else {
    // Rank-deficient design: ridge with tiny damping, flagged.
    model.ridge_fallback = true;
    Matrix gram = design.transpose() * design;
    const double damp = 1e-8 * std::max(1.0, gram.trace() / (p + 1));
    gram.diagonal().array() += damp;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularDesign, "regress",
                  "ridge fallback failed to factorize");
    }
    beta = ldlt.solve(design.transpose() * y);
  }
  model.coef = beta.head(p);
  model.intercept = beta(p);
  return model;
}

TrainedModel train_cart(const Matrix& x, const Vector& y,
                        const ForestConfig& config) {
  const Eigen::Index n = x.rows();
  if (n < 1 || y.size() != n || x.cols() < 1) {
    throw Error(ErrorCode::EmptyTraining, "regress", "empty training set");
  }
  ForestConfig cfg = config;
  cfg.mtry = static_cast<int>(x.cols());  // single tree uses every feature
  TrainedModel model;
  model.kind = ModelKind::Dt;
  model.n_features = static_cast<int>(x.cols());
  model.forest_config = cfg;
  const std::vector<double> w(n, 1.0);
  auto presort = presort_features(x);
  model.trees.push_back(build_tree(x, y, w, cfg, presort, nullptr));
  return model;
}

TrainedModel train_rf(const Matrix& x, const Vector& y,
                      const ForestConfig& config) {
  const Eigen::Index n = x.rows();
  if (n < 1 || y.size() != n || x.cols() < 1) {
    throw Error(ErrorCode::EmptyTraining, "regress", "empty training set");
  }
  if (config.n_trees < 1) {
    throw Error(ErrorCode::InvalidConfig, "regress", "n_trees must be >= 1");
  }
  TrainedModel model;
  model.kind = ModelKind::Rf;
  model.n_features = static_cast<int>(x.cols());
  model.forest_config = config;
  model.trees.resize(config.n_trees);

  const auto presort = presort_features(x);
  const int mtry = config.resolve_mtry(static_cast<int>(x.cols()));

  parallel_for(static_cast<std::size_t>(config.n_trees), [&](std::size_t t) {
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(t + 1)));
    std::vector<double> w;
    if (config.bootstrap) {
      w.assign(n, 0.0);
      for (Eigen::Index d = 0; d < n; ++d) {
        w[static_cast<Eigen::Index>(rng() % n)] += 1.0;
      }
    } else {
      w.assign(n, 1.0);
    }
    std::mt19937_64* node_rng = mtry < x.cols() ? &rng : nullptr;
    model.trees[t] = build_tree(x, y, w, config, presort, node_rng);
  });
  return model;
}

TrainedModel train_svr(const Matrix& x, const Vector& y,
                       const SvrConfig& config) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n < 2 || y.size() != n) {
    throw Error(ErrorCode::EmptyTraining, "regress",
                "SVR needs at least 2 rows");
  }
  if (!(config.c > 0.0) || config.epsilon < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "regress",
                "require C > 0 and epsilon >= 0");
  }
  TrainedModel model;
  model.kind = ModelKind::Svr;
  model.n_features = static_cast<int>(p);
  model.standardized = true;
  model.svr_config = config;
  standardize_fit(x, model.feat_mean, model.feat_sd);
  Matrix xs = standardize_apply(x, model.feat_mean, model.feat_sd);

  double gamma = config.gamma;
  if (gamma <= 0.0) {
    double mean_var = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      mean_var += (xs.col(j).array() - xs.col(j).mean()).square().sum() /
                  std::max<double>(n - 1, 1);
    }
    mean_var /= static_cast<double>(p);
    gamma = 1.0 / (static_cast<double>(p) * (mean_var > 0.0 ? mean_var : 1.0));
  }
  model.gamma_value = gamma;

  Matrix kernel(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    kernel(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double k = rbf(xs.row(i), xs.row(j), gamma);
      kernel(i, j) = k;
      kernel(j, i) = k;
    }
  }

  // Pairwise dual descent on beta = alpha - alpha*, keeping sum(beta) = 0 and
  // |beta_i| <= C. The epsilon-insensitive L1 term makes each 1-D pair
  // subproblem piecewise quadratic; it is solved exactly segment by segment.
  const double c_box = config.c;
  const double eps = config.epsilon;
  Vector beta = Vector::Zero(n);
  Vector f = Vector::Zero(n);  // K * beta

  auto grad_inc = [&](Eigen::Index i) {
    // Right-derivative of the objective along +e_i.
    return f(i) - y(i) + (beta(i) >= 0.0 ? eps : -eps);
  };
  auto grad_dec = [&](Eigen::Index i) {
    // Right-derivative along -e_i.
    return -(f(i) - y(i)) + (beta(i) > 0.0 ? -eps : eps);
  };

  long iter = 0;
  bool converged = false;
  while (iter < config.max_passes) {
    ++iter;
    // Maximal violating pair; track a runner-up on each side so i != j.
    Eigen::Index i1 = -1, i2 = -1, j1 = -1, j2 = -1;
    double gi1 = 0.0, gi2 = 0.0, gj1 = 0.0, gj2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (beta(k) < c_box) {
        const double g = grad_inc(k);
        if (i1 < 0 || g < gi1) {
          i2 = i1;
          gi2 = gi1;
          i1 = k;
          gi1 = g;
        } else if (i2 < 0 || g < gi2) {
          i2 = k;
          gi2 = g;
        }
      }
      if (beta(k) > -c_box) {
        const double g = grad_dec(k);
        if (j1 < 0 || g < gj1) {
          j2 = j1;
          gj2 = gj1;
          j1 = k;
          gj1 = g;
        } else if (j2 < 0 || g < gj2) {
          j2 = k;
          gj2 = g;
        }
      }
    }
    Eigen::Index bi = i1, bj = j1;
    double viol = (bi >= 0 && bj >= 0) ? gi1 + gj1 : 1.0;
    if (bi >= 0 && bi == bj) {
      const double via = (i2 >= 0) ? gi2 + gj1 : 1.0;
      const double vib = (j2 >= 0) ? gi1 + gj2 : 1.0;
      if (via <= vib) {
        bi = i2;
        viol = via;
      } else {
        bj = j2;
        viol = vib;
      }
    }
    if (bi < 0 || bj < 0 || viol > -config.tol) {
      converged = true;
      break;
    }

    // Exact minimization along beta_i += delta, beta_j -= delta, delta >= 0.
    // The objective is convex piecewise quadratic with kinks where either
    // coefficient crosses zero.
    const Eigen::Index i = bi, j = bj;
    const double eta = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
    const double hi = std::min(c_box - beta(i), beta(j) + c_box);
    std::vector<double> brk = {0.0};
    if (-beta(i) > 0.0 && -beta(i) < hi) brk.push_back(-beta(i));
    if (beta(j) > 0.0 && beta(j) < hi && beta(j) != -beta(i)) {
      brk.push_back(beta(j));
    }
    brk.push_back(hi);
    std::sort(brk.begin(), brk.end());

    auto deriv = [&](double delta, double at_sign) {
      const double si = (beta(i) + delta > 0.0 ||
                         (beta(i) + delta == 0.0 && at_sign > 0.0))
                            ? 1.0
                            : -1.0;
      const double sj = (beta(j) - delta > 0.0 ||
                         (beta(j) - delta == 0.0 && at_sign < 0.0))
                            ? 1.0
                            : -1.0;
      return eta * delta + (f(i) - f(j)) - (y(i) - y(j)) + eps * (si - sj);
    };

    double delta = hi;  // default: descending across the whole range
    for (std::size_t s = 0; s + 1 < brk.size(); ++s) {
      const double a = brk[s], b = brk[s + 1];
      if (b <= a) continue;
      const double da = deriv(a, +1.0);
      if (da >= 0.0) {
        delta = a;
        break;
      }
      const double db = deriv(b, -1.0);
      if (db <= 0.0) continue;  // still descending at segment end
      delta = eta > 0.0 ? a + (-da) / eta : a;
      delta = std::clamp(delta, a, b);
      break;
    }
    if (delta <= 0.0) {
      converged = true;  // numerically stuck at a kink
      break;
    }

    beta(i) += delta;
    beta(j) -= delta;
    f += delta * (kernel.col(i) - kernel.col(j));
  }
  if (!converged) {
    throw Error(ErrorCode::NoConvergence, "regress",
                "SVR did not converge within max_passes");
  }

  // Bias from interior points; fall back to the feasible-interval midpoint.
  double b_sum = 0.0;
  int b_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (beta(i) > 1e-9 * c_box && beta(i) < c_box * (1.0 - 1e-9)) {
      b_sum += y(i) - f(i) - eps;
      ++b_count;
    } else if (beta(i) < -1e-9 * c_box && beta(i) > -c_box * (1.0 - 1e-9)) {
      b_sum += y(i) - f(i) + eps;
      ++b_count;
    }
  }
  if (b_count > 0) {
    model.bias = b_sum / b_count;
  } else {
    double lo_b = -1e300, hi_b = 1e300;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = y(i) - f(i);
      if (beta(i) >= c_box * (1.0 - 1e-9)) {
        hi_b = std::min(hi_b, r - eps);
      } else if (beta(i) <= -c_box * (1.0 - 1e-9)) {
        lo_b = std::max(lo_b, r + eps);
      } else {
        lo_b = std::max(lo_b, r - eps);
        hi_b = std::min(hi_b, r + eps);
      }
    }
    model.bias = (lo_b > -1e300 && hi_b < 1e300) ? 0.5 * (lo_b + hi_b) : 0.0;
  }

  // Keep support vectors only.
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (beta(i) != 0.0) sv.push_back(i);
  }
  model.support_x.resize(sv.size(), p);
  model.beta.resize(sv.size());
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support_x.row(k) = xs.row(sv[k]);
    model.beta(k) = beta(sv[k]);
  }
  return model;
}

double predict_tree(const Tree& tree, ConstVectorRef x) {
  int node = 0;
  while (tree.nodes[node].feature >= 0) {
    const TreeNode& nd = tree.nodes[node];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return tree.nodes[node].prediction;
}

Vector predict(const TrainedModel& model, const Matrix& x) {
  if (x.cols() != model.n_features) {
    throw Error(ErrorCode::FeatureMismatch, "regress",
                "column count does not match training provenance");
  }
  const Eigen::Index n = x.rows();
  Vector out(n);
  switch (model.kind) {
    case ModelKind::Lr: {
      Matrix xs = standardize_apply(x, model.feat_mean, model.feat_sd);
      out = (xs * model.coef).array() + model.intercept;
      break;
    }
    case ModelKind::Dt:
    case ModelKind::Rf: {
      const double inv = 1.0 / static_cast<double>(model.trees.size());
      for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (const auto& tree : model.trees) acc += predict_tree(tree, x.row(i));
        out(i) = acc * inv;
      }
      break;
    }
    case ModelKind::Svr: {
      Matrix xs = standardize_apply(x, model.feat_mean, model.feat_sd);
      for (Eigen::Index i = 0; i < n; ++i) {
        double acc = model.bias;
        for (Eigen::Index k = 0; k < model.beta.size(); ++k) {
          acc += model.beta(k) *
                 rbf(model.support_x.row(k), xs.row(i), model.gamma_value);
        }
        out(i) = acc;
      }
      break;
    }
  }
  return out;
}

Vector forest_importance(const TrainedModel& model) {
  if (model.trees.empty()) {
    throw Error(ErrorCode::EmptyTraining, "regress", "model has no trees");
  }
  Vector imp = Vector::Zero(model.n_features);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) imp(node.feature) += node.impurity_decrease;
    }
  }
  return imp / static_cast<double>(model.trees.size());
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vec_from_json(const json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  json j;
  j["format"] = "biozbp-model-v1";
  j["kind"] = model_kind_name(model.kind);
  j["n_features"] = model.n_features;
  j["standardized"] = model.standardized;
  j["feat_mean"] = vec_to_json(model.feat_mean);
  j["feat_sd"] = vec_to_json(model.feat_sd);
  j["provenance"] = model.provenance;
  switch (model.kind) {
    case ModelKind::Lr:
      j["coef"] = vec_to_json(model.coef);
      j["intercept"] = model.intercept;
      j["ridge_fallback"] = model.ridge_fallback;
      break;
    case ModelKind::Dt:
    case ModelKind::Rf: {
      j["forest"] = {{"n_trees", model.forest_config.n_trees},
                     {"min_samples_leaf", model.forest_config.min_samples_leaf},
                     {"max_depth", model.forest_config.max_depth},
                     {"mtry", model.forest_config.mtry},
                     {"bootstrap", model.forest_config.bootstrap},
                     {"seed", model.forest_config.seed}};
      json trees = json::array();
      for (const auto& tree : model.trees) {
        json nodes = json::array();
        for (const auto& nd : tree.nodes) {
          nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right,
                           nd.prediction, nd.n_samples, nd.impurity_decrease});
        }
        trees.push_back(std::move(nodes));
      }
      j["trees"] = std::move(trees);
      break;
    }
    case ModelKind::Svr: {
      j["svr"] = {{"c", model.svr_config.c},
                  {"epsilon", model.svr_config.epsilon},
                  {"gamma", model.svr_config.gamma},
                  {"tol", model.svr_config.tol},
                  {"max_passes", model.svr_config.max_passes}};
      j["gamma_value"] = model.gamma_value;
      j["bias"] = model.bias;
      j["beta"] = vec_to_json(model.beta);
      json rows = json::array();
      for (Eigen::Index i = 0; i < model.support_x.rows(); ++i) {
        rows.push_back(vec_to_json(model.support_x.row(i)));
      }
      j["support_x"] = std::move(rows);
      break;
    }
  }
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "regress", "cannot write " + path);
  }
  out << j.dump() << "\n";
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "regress", "cannot read " + path);
  }
  json j;
  in >> j;
  if (j.value("format", "") != "biozbp-model-v1") {
    throw Error(ErrorCode::IoFailure, "regress", "unrecognized model file");
  }
  TrainedModel model;
  model.kind = model_kind_from_name(j["kind"].get<std::string>());
  model.n_features = j["n_features"].get<int>();
  model.standardized = j["standardized"].get<bool>();
  model.feat_mean = vec_from_json(j["feat_mean"]);
  model.feat_sd = vec_from_json(j["feat_sd"]);
  model.provenance = j.value("provenance", "");
  switch (model.kind) {
    case ModelKind::Lr:
      model.coef = vec_from_json(j["coef"]);
      model.intercept = j["intercept"].get<double>();
      model.ridge_fallback = j["ridge_fallback"].get<bool>();
      break;
    case ModelKind::Dt:
    case ModelKind::Rf: {
      const json& f = j["forest"];
      model.forest_config.n_trees = f["n_trees"].get<int>();
      model.forest_config.min_samples_leaf = f["min_samples_leaf"].get<int>();
      model.forest_config.max_depth = f["max_depth"].get<int>();
      model.forest_config.mtry = f["mtry"].get<int>();
      model.forest_config.bootstrap = f["bootstrap"].get<bool>();
      model.forest_config.seed = f["seed"].get<std::uint64_t>();
      for (const auto& tj : j["trees"]) {
        Tree tree;
        tree.nodes.reserve(tj.size());
        for (const auto& nj : tj) {
          TreeNode nd;
          nd.feature = nj[0].get<int>();
          nd.threshold = nj[1].get<double>();
          nd.left = nj[2].get<int>();
          nd.right = nj[3].get<int>();
          nd.prediction = nj[4].get<double>();
          nd.n_samples = nj[5].get<double>();
          nd.impurity_decrease = nj[6].get<double>();
          tree.nodes.push_back(nd);
        }
        model.trees.push_back(std::move(tree));
      }
      break;
    }
    case ModelKind::Svr: {
      const json& s = j["svr"];
      model.svr_config.c = s["c"].get<double>();
      model.svr_config.epsilon = s["epsilon"].get<double>();
      model.svr_config.gamma = s["gamma"].get<double>();
      model.svr_config.tol = s["tol"].get<double>();
      model.svr_config.max_passes = s["max_passes"].get<long>();
      model.gamma_value = j["gamma_value"].get<double>();
      model.bias = j["bias"].get<double>();
      model.beta = vec_from_json(j["beta"]);
      const json& rows = j["support_x"];
      model.support_x.resize(rows.size(), model.n_features);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        model.support_x.row(i) = vec_from_json(rows[i]);
      }
      break;
    }
  }
  return model;
}

}  // namespace biozbp::regress
